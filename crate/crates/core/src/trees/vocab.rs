//! Vocabularies shared by the dataset, the codecs, and the executor.

use std::collections::HashMap;

use super::molecule::Molecule;
use super::registry::TemplateRegistry;
use super::TreeError;

/// Substructure labels in a fixed order, with an index for lookups.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubstructureVocab {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl SubstructureVocab {
    pub fn new(labels: Vec<String>) -> Result<Self, TreeError> {
        let mut index = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(TreeError::Vocab { detail: format!("duplicate substructure label {l}") });
            }
        }
        Ok(Self { labels, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(|s| s.as_str())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// All three vocabularies: substructures, starting molecules, templates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabularies {
    pub substructures: SubstructureVocab,
    pub starting_molecules: Vec<Molecule>,
    pub templates: TemplateRegistry,
    mol_index: HashMap<String, usize>,
}

impl Vocabularies {
    pub fn new(
        substructures: SubstructureVocab,
        starting_molecules: Vec<Molecule>,
        templates: TemplateRegistry,
    ) -> Result<Self, TreeError> {
        let mut mol_index = HashMap::new();
        for (i, m) in starting_molecules.iter().enumerate() {
            if mol_index.insert(m.as_str().to_string(), i).is_some() {
                return Err(TreeError::Vocab { detail: format!("duplicate starting molecule {m}") });
            }
        }
        Ok(Self { substructures, starting_molecules, templates, mol_index })
    }

    pub fn n_substructures(&self) -> usize {
        self.substructures.len()
    }

    pub fn n_starting_molecules(&self) -> usize {
        self.starting_molecules.len()
    }

    pub fn n_templates(&self) -> usize {
        self.templates.len()
    }

    pub fn starting_molecule(&self, index: usize) -> Option<&Molecule> {
        self.starting_molecules.get(index)
    }

    pub fn starting_molecule_index(&self, canonical: &str) -> Option<usize> {
        self.mol_index.get(canonical).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::registry::TemplateEntry;

    #[test]
    fn duplicate_labels_rejected() {
        assert!(SubstructureVocab::new(vec!["A".into(), "A".into()]).is_err());
        assert!(SubstructureVocab::new(vec!["A".into(), "B".into()]).is_ok());
    }

    #[test]
    fn duplicate_molecules_rejected() {
        let subs = SubstructureVocab::new(vec![]).unwrap();
        let reg = TemplateRegistry::new(vec![TemplateEntry { id: 0, arity: 1, token: 'A' }]).unwrap();
        let m = Molecule::parse("AB").unwrap();
        assert!(Vocabularies::new(subs, vec![m.clone(), m], reg).is_err());
    }
}
