//! Latent-space property optimization: an exact GP surrogate on latent
//! codes, expected-improvement acquisition, and the batched BO loop.

mod bo;
mod ei;
mod gp;
pub mod linalg;

pub use bo::{
    bo_loop, embed_training_codes, random_search, toy_scorer, BoConfig, BoError, BoIterStats,
    BoRecord, BoRun,
};
pub use ei::{expected_improvement, normal_cdf, normal_pdf};
pub use gp::{gp_condition, gp_fit, gp_predict, GpHyper, GpModel, GpOptions};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("kernel matrix not positive definite at pivot {pivot} (value {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("need at least two consistent training points, got {n}")]
    InsufficientData { n: usize },
}
