//! Deterministic bottom-up execution of reaction trees against a
//! template backend, plus generation metrics.
//!
//! Chemical failure (a template precondition does not hold) is a result
//! value so metrics can count it; a malformed tree is an error.

mod metrics;
pub mod synth;

pub use metrics::{compute_metrics, default_quality_hook, descriptor_distance, MetricCounts, MetricsReport};
pub use synth::{synthesizability_eval, SynthReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trees::{
    validate_structure, ApplyError, NodeKind, ReactionTree, TemplateBackend, TreeError, Vocabularies,
};

#[derive(Debug, Error)]
pub enum ExecutorError {
    #[error(transparent)]
    Structural(#[from] TreeError),
    #[error("backend transport failure at node {node}: {detail}")]
    Transport { node: usize, detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExecStatus {
    Valid,
    InvalidAt { node: usize, reason: String },
}

/// One successful reaction step in execution order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecStep {
    pub node: usize,
    pub template: usize,
    pub reactants: Vec<String>,
    pub product: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    #[serde(flatten)]
    pub status: ExecStatus,
    pub product: Option<String>,
    pub trace: Vec<ExecStep>,
}

impl ExecutionResult {
    pub fn is_valid(&self) -> bool {
        matches!(self.status, ExecStatus::Valid)
    }
}

/// Executes a structurally valid tree: leaves resolve through the
/// starting-molecule vocabulary, template nodes apply their rule to their
/// children's products in post-order, and the first chemical failure
/// stops with `InvalidAt`.
pub fn execute(
    tree: &ReactionTree,
    vocab: &Vocabularies,
    backend: &dyn TemplateBackend,
) -> Result<ExecutionResult, ExecutorError> {
    validate_structure(tree, &vocab.templates, vocab.n_starting_molecules())?;
    let table = tree.children_table();
    let mut trace = Vec::new();
    match product_of(tree, vocab, backend, &table, tree.root, &mut trace) {
        Ok(product) => Ok(ExecutionResult { status: ExecStatus::Valid, product: Some(product), trace }),
        Err(StepFailure::Chemical { node, reason }) => Ok(ExecutionResult {
            status: ExecStatus::InvalidAt { node, reason },
            product: None,
            trace,
        }),
        Err(StepFailure::Transport { node, detail }) => Err(ExecutorError::Transport { node, detail }),
    }
}

enum StepFailure {
    Chemical { node: usize, reason: String },
    Transport { node: usize, detail: String },
}

fn product_of(
    tree: &ReactionTree,
    vocab: &Vocabularies,
    backend: &dyn TemplateBackend,
    table: &[Vec<usize>],
    mol_node: usize,
    trace: &mut Vec<ExecStep>,
) -> Result<String, StepFailure> {
    debug_assert_eq!(tree.nodes[mol_node].kind, NodeKind::Molecule);
    let children = &table[mol_node];
    if children.is_empty() {
        let label = tree.nodes[mol_node].label as usize;
        return Ok(vocab.starting_molecule(label).expect("validated label").as_str().to_string());
    }
    let tpl_node = children[0];
    let tpl_label = tree.nodes[tpl_node].label as usize;
    let entry = vocab.templates.get(tpl_label).expect("validated template");

    let mut reactants = Vec::with_capacity(table[tpl_node].len());
    for &reactant in &table[tpl_node] {
        reactants.push(product_of(tree, vocab, backend, table, reactant, trace)?);
    }
    match backend.apply(entry, &reactants) {
        Ok(product) => {
            trace.push(ExecStep { node: tpl_node, template: tpl_label, reactants, product: product.clone() });
            Ok(product)
        }
        Err(ApplyError::PreconditionFailed { reason, reactant }) => Err(StepFailure::Chemical {
            node: tpl_node,
            reason: match reactant {
                Some(i) => format!("reactant {i}: {reason}"),
                None => reason,
            },
        }),
        Err(ApplyError::Transport(detail)) => Err(StepFailure::Transport { node: tpl_node, detail }),
        // arity and unknown-template cases are ruled out by validation
        Err(other) => Err(StepFailure::Transport { node: tpl_node, detail: other.to_string() }),
    }
}
