//! A generative-modeling toolkit for multi-step synthesis routes.
//!
//! The crate couples a variational autoencoder over paired trees — a
//! junction tree describing a product's substructures and a reaction
//! tree describing how to make it — with a deterministic executor that
//! turns decoded reaction trees into product strings via rewrite-rule
//! templates, and a Gaussian-process Bayesian-optimization loop that
//! searches the learned latent space for high-scoring products.
//!
//! Start with the guide in `book/` (each chapter's code runs as a
//! doc-test) or with [`vae::Model`] for the end-to-end model.

pub mod bayesopt;
pub mod codec;
pub mod executor;
pub mod jt_codec;
pub mod numerics;
pub mod pipeline;
pub mod rxn_codec;
pub mod trees;
pub mod util;
pub mod vae;

pub use numerics::NumericsError;

// Every code block in the guide runs as a doc-test, so the book cannot
// drift from the library. mdBook itself does not execute snippets; this
// is the standard include_str workaround.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }
    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(getting_started, "../../../book/src/getting-started.md");
    chapter!(chemistry, "../../../book/src/chemistry.md");
    chapter!(autodiff, "../../../book/src/autodiff.md");
    chapter!(codecs, "../../../book/src/codecs.md");
    chapter!(training, "../../../book/src/training.md");
    chapter!(metrics, "../../../book/src/metrics.md");
    chapter!(bayesopt, "../../../book/src/bayesopt.md");
    chapter!(cli, "../../../book/src/cli.md");
    chapter!(formats, "../../../book/src/formats.md");
}
