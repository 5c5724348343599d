//! Reaction templates and their deterministic toy semantics.

use serde::{Deserialize, Serialize};

use super::molecule::Molecule;
use super::TreeError;

/// One reaction template: fixed reactant count and a precondition token
/// every reactant must contain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateEntry {
    pub id: usize,
    pub arity: usize,
    pub token: char,
}

/// Dense table of templates, indexed by id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TemplateRegistry {
    entries: Vec<TemplateEntry>,
}

impl TemplateRegistry {
    pub fn new(entries: Vec<TemplateEntry>) -> Result<Self, TreeError> {
        for (i, e) in entries.iter().enumerate() {
            if e.id != i {
                return Err(TreeError::Registry {
                    detail: format!("template ids must be dense 0..n: found {} at {}", e.id, i),
                });
            }
            if !(1..=3).contains(&e.arity) {
                return Err(TreeError::Registry { detail: format!("template {}: arity {} not in 1..=3", e.id, e.arity) });
            }
            if !e.token.is_ascii_uppercase() {
                return Err(TreeError::Registry { detail: format!("template {}: token must be A-Z", e.id) });
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&TemplateEntry> {
        self.entries.get(id)
    }

    pub fn entries(&self) -> &[TemplateEntry] {
        &self.entries
    }

    pub fn arity(&self, id: usize) -> Option<usize> {
        self.get(id).map(|e| e.arity)
    }
}

/// Why a template application failed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApplyError {
    #[error("template {template}: expected {expected} reactants, got {got}")]
    ArityMismatch { template: usize, expected: usize, got: usize },
    /// Chemical failure: a reactant is missing the required token. Carries
    /// the first offending reactant index when known.
    #[error("precondition failed{}: {reason}", reactant.map(|r| format!(" on reactant {r}")).unwrap_or_default())]
    PreconditionFailed { reactant: Option<usize>, reason: String },
    #[error("unknown template id {0}")]
    UnknownTemplate(usize),
    #[error("oracle transport failure: {0}")]
    Transport(String),
}

/// Applies template `template_id` to `reactants`.
///
/// Succeeds iff every reactant's canonical string contains the template's
/// token; the product is `T<id>(...)` over the reactant canonicals in
/// sorted order, so the result does not depend on reactant order.
pub fn apply_template_toy(
    registry: &TemplateRegistry,
    template_id: usize,
    reactants: &[Molecule],
) -> Result<Molecule, ApplyError> {
    let entry = registry.get(template_id).ok_or(ApplyError::UnknownTemplate(template_id))?;
    if reactants.len() != entry.arity {
        return Err(ApplyError::ArityMismatch {
            template: template_id,
            expected: entry.arity,
            got: reactants.len(),
        });
    }
    for (i, r) in reactants.iter().enumerate() {
        if !r.contains_token(entry.token) {
            return Err(ApplyError::PreconditionFailed {
                reactant: Some(i),
                reason: format!("missing token {}", entry.token),
            });
        }
    }
    let mut parts: Vec<&str> = reactants.iter().map(|m| m.as_str()).collect();
    parts.sort_unstable();
    Ok(Molecule::from_canonical_unchecked(format!("T{}({})", template_id, parts.join(","))))
}

/// Anything that can run one template application on canonical strings:
/// the in-process toy chemistry or an external oracle process.
pub trait TemplateBackend {
    fn apply(&self, template: &TemplateEntry, reactants: &[String]) -> Result<String, ApplyError>;
}

/// Backend that runs [`apply_template_toy`] in-process.
#[derive(Debug, Clone, Copy)]
pub struct ToyBackend<'a> {
    pub registry: &'a TemplateRegistry,
}

impl TemplateBackend for ToyBackend<'_> {
    fn apply(&self, template: &TemplateEntry, reactants: &[String]) -> Result<String, ApplyError> {
        let mols: Vec<Molecule> = reactants
            .iter()
            .map(|s| {
                Molecule::parse(s).map_err(|e| ApplyError::PreconditionFailed {
                    reactant: None,
                    reason: format!("unparseable reactant: {e}"),
                })
            })
            .collect::<Result<_, _>>()?;
        apply_template_toy(self.registry, template.id, &mols).map(|m| m.as_str().to_string())
    }
}
