//! Dataset files: UTF-8 JSON holding the vocabularies and every
//! (junction tree, reaction tree, product) triple.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::junction::JunctionTree;
use super::molecule::Molecule;
use super::reaction::{validate_structure, ReactionTree};
use super::registry::{TemplateEntry, TemplateRegistry};
use super::vocab::{SubstructureVocab, Vocabularies};
use super::TreeError;

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// One training instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainPair {
    pub junction: JunctionTree,
    pub reaction: ReactionTree,
    pub product: Molecule,
}

/// Vocabularies plus training pairs.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub vocabularies: Vocabularies,
    pub trees: Vec<TrainPair>,
}

#[derive(Serialize, Deserialize)]
struct DatasetWire {
    format_version: u32,
    vocabularies: VocabWire,
    trees: Vec<TrainPair>,
}

#[derive(Serialize, Deserialize)]
struct VocabWire {
    substructures: Vec<String>,
    starting_molecules: Vec<String>,
    templates: Vec<TemplateEntry>,
}

impl Dataset {
    /// Validates every tree against the vocabularies; run after loading
    /// and before saving so no invalid dataset circulates.
    pub fn validate(&self) -> Result<(), TreeError> {
        let v = &self.vocabularies;
        for (i, pair) in self.trees.iter().enumerate() {
            pair.junction
                .validate(v.n_substructures())
                .map_err(|e| TreeError::Dataset { detail: format!("tree {i}: junction: {e}") })?;
            validate_structure(&pair.reaction, &v.templates, v.n_starting_molecules())
                .map_err(|e| TreeError::Dataset { detail: format!("tree {i}: reaction: {e}") })?;
        }
        Ok(())
    }
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), TreeError> {
    dataset.validate()?;
    let wire = DatasetWire {
        format_version: DATASET_FORMAT_VERSION,
        vocabularies: VocabWire {
            substructures: dataset.vocabularies.substructures.labels().to_vec(),
            starting_molecules: dataset
                .vocabularies
                .starting_molecules
                .iter()
                .map(|m| m.as_str().to_string())
                .collect(),
            templates: dataset.vocabularies.templates.entries().to_vec(),
        },
        trees: dataset.trees.clone(),
    };
    let file = File::create(path).map_err(|e| TreeError::Io { path: path.display().to_string(), source: e })?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &wire).map_err(|e| TreeError::Dataset { detail: e.to_string() })?;
    w.write_all(b"\n")
        .map_err(|e| TreeError::Io { path: path.display().to_string(), source: e })?;
    w.flush().map_err(|e| TreeError::Io { path: path.display().to_string(), source: e })?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset, TreeError> {
    let file = File::open(path).map_err(|e| TreeError::Io { path: path.display().to_string(), source: e })?;
    let wire: DatasetWire = serde_json::from_reader(BufReader::new(file)).map_err(|e| TreeError::Dataset {
        detail: format!("{e}"), // serde_json reports line and column
    })?;
    if wire.format_version != DATASET_FORMAT_VERSION {
        return Err(TreeError::Dataset { detail: format!("unsupported format_version {}", wire.format_version) });
    }
    let substructures = SubstructureVocab::new(wire.vocabularies.substructures)?;
    let starting_molecules = wire
        .vocabularies
        .starting_molecules
        .iter()
        .map(|s| Molecule::parse(s))
        .collect::<Result<Vec<_>, _>>()?;
    let templates = TemplateRegistry::new(wire.vocabularies.templates)?;
    let dataset = Dataset {
        vocabularies: Vocabularies::new(substructures, starting_molecules, templates)?,
        trees: wire.trees,
    };
    dataset.validate()?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::generator::{generate_toy_dataset, GenConfig};

    fn small() -> Dataset {
        generate_toy_dataset(&GenConfig {
            seed: 4,
            n_trees: 12,
            n_templates: 4,
            n_start_molecules: 12,
            max_depth: 2,
            ..GenConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        let d = small();
        save_dataset(&d, &path).unwrap();
        let e = load_dataset(&path).unwrap();
        assert_eq!(d.vocabularies, e.vocabularies);
        assert_eq!(d.trees, e.trees);
    }

    #[test]
    fn arity_mismatch_names_the_node() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        let mut d = small();
        // drop the last leaf (ids are preorder, so the last node is a
        // leaf) leaving its template parent one reactant short
        let t = &mut d.trees[0].reaction;
        let leaf = t.nodes.pop().unwrap().id;
        let tpl = t.edges.iter().find(|&&(_, c)| c == leaf).unwrap().0;
        t.edges.retain(|&(_, c)| c != leaf);
        let err = save_dataset(&d, &path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tree 0") && msg.contains(&format!("node {tpl}")), "{msg}");
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        save_dataset(&small(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(load_dataset(&path).is_err());
    }
}
