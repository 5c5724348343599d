//! Core data model: junction trees, reaction trees, vocabularies, the
//! toy chemistry backend, dataset I/O, and the external-oracle client.

pub mod dataset;
pub mod generator;
mod junction;
mod molecule;
mod oracle;
mod reaction;
mod registry;
mod vocab;

pub use dataset::{load_dataset, save_dataset, Dataset, TrainPair, DATASET_FORMAT_VERSION};
pub use generator::{generate_toy_dataset, GenConfig, TOKEN_POOL};
pub use junction::{decompose_labels, decompose_toy, JunctionNode, JunctionTree, LabeledTree};
pub use molecule::{Molecule, Term, MAX_FRAGMENT_LEN};
pub use oracle::{oracle_apply, OracleBackend, OracleClient, DEFAULT_ORACLE_TIMEOUT};
pub use reaction::{validate_structure, NodeKind, ReactionTree, RxnNode};
pub use registry::{apply_template_toy, ApplyError, TemplateBackend, TemplateEntry, TemplateRegistry, ToyBackend};
pub use vocab::{SubstructureVocab, Vocabularies};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("cannot parse molecule {input:?}: {detail}")]
    MoleculeParse { input: String, detail: String },
    #[error("structural violation{}: {detail}", node.map(|n| format!(" at node {n}")).unwrap_or_default())]
    Structure { node: Option<usize>, detail: String },
    #[error("registry error: {detail}")]
    Registry { detail: String },
    #[error("vocabulary error: {detail}")]
    Vocab { detail: String },
    #[error("substructure {label:?} not in vocabulary")]
    UnknownSubstructure { label: String },
    #[error("dataset schema error: {detail}")]
    Dataset { detail: String },
    #[error("infeasible generator configuration: {detail}")]
    Infeasible { detail: String },
    #[error("oracle {endpoint}: {detail}")]
    Oracle { endpoint: String, detail: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}
