//! The joint model: both codecs wired to the ELBO objective, prior
//! sampling, reconstruction, and embedding extraction.
//!
//! Generation always decodes the junction tree first, re-encodes it to
//! obtain the node embeddings, and only then decodes the reaction tree
//! against them.

mod train;

pub use train::{beta_at, evaluate, train, EpochStats, TrainReport, GRAD_CLIP_NORM};

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{
    sample_latent, sample_prior_values, DecodeLimits, ModelDims, PosteriorParams,
};
use crate::jt_codec::{
    decode_junction, encode_junction, junction_teacher_forced_loss, JtError, JtParams,
};
use crate::numerics::{load_checkpoint, save_checkpoint, NumericsError, ParamSet, Tape, Tensor, TensorId};
use crate::rxn_codec::{
    decode_reaction, encode_reaction, reaction_teacher_forced_loss, RxnError, RxnParams,
};
use crate::trees::{JunctionTree, ReactionTree, TrainPair, Vocabularies};
use crate::util::substream;

pub const MODEL_META_VERSION: u32 = 1;

/// Training and architecture hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelConfig {
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub kl_warmup_epochs: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: 50,
            hidden_dim: 200,
            lr: 0.001,
            batch_size: 32,
            epochs: 100,
            kl_warmup_epochs: 10,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), VaeError> {
        if self.latent_dim == 0 || self.hidden_dim == 0 || self.batch_size == 0 || self.epochs == 0 || self.lr <= 0.0
        {
            return Err(VaeError::Config { detail: "all config values must be positive".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum VaeError {
    #[error("invalid model config: {detail}")]
    Config { detail: String },
    #[error("model/vocabulary mismatch: {detail}")]
    DimsMismatch { detail: String },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch} on example {example}: {source}")]
    NonFiniteLoss { epoch: usize, example: usize, source: NumericsError },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("junction codec: {0}")]
    Jt(#[from] JtError),
    #[error("reaction codec: {0}")]
    Rxn(#[from] RxnError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("model metadata error: {detail}")]
    Meta { detail: String },
}

/// Sidecar written next to every checkpoint.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelMeta {
    pub format_version: u32,
    pub config: ModelConfig,
    pub n_substructures: usize,
    pub n_templates: usize,
    pub n_start_molecules: usize,
    pub use_step_context: bool,
}

/// The full model: parameters, codec handles, and sizes.
pub struct Model {
    pub params: ParamSet,
    pub jt: JtParams,
    pub rxn: RxnParams,
    pub dims: ModelDims,
    pub config: ModelConfig,
    /// When set, each reactant step recomputes its attention context
    /// from the previous hidden state instead of reusing the parent's.
    pub use_step_context: bool,
}

impl Model {
    /// Fresh model with seeded initialization.
    pub fn new(vocab: &Vocabularies, config: ModelConfig, use_step_context: bool) -> Result<Self, VaeError> {
        config.validate()?;
        let dims = ModelDims {
            latent: config.latent_dim,
            hidden: config.hidden_dim,
            n_substructures: vocab.n_substructures(),
            n_templates: vocab.n_templates(),
            n_start_molecules: vocab.n_starting_molecules(),
        };
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let jt = JtParams::register(&mut params, &dims, &mut rng)?;
        let rxn = RxnParams::register(&mut params, &dims, &mut rng)?;
        Ok(Self { params, jt, rxn, dims, config, use_step_context })
    }

    pub fn check_vocab(&self, vocab: &Vocabularies) -> Result<(), VaeError> {
        let d = &self.dims;
        if vocab.n_substructures() != d.n_substructures
            || vocab.n_templates() != d.n_templates
            || vocab.n_starting_molecules() != d.n_start_molecules
        {
            return Err(VaeError::DimsMismatch {
                detail: format!(
                    "model built for ({}, {}, {}) but vocab has ({}, {}, {})",
                    d.n_substructures,
                    d.n_templates,
                    d.n_start_molecules,
                    vocab.n_substructures(),
                    vocab.n_templates(),
                    vocab.n_starting_molecules()
                ),
            });
        }
        Ok(())
    }

    /// Writes the checkpoint and its `<path>.json` metadata sidecar.
    pub fn save(&self, path: &Path) -> Result<(), VaeError> {
        save_checkpoint(path, &self.params)?;
        let meta = ModelMeta {
            format_version: MODEL_META_VERSION,
            config: self.config.clone(),
            n_substructures: self.dims.n_substructures,
            n_templates: self.dims.n_templates,
            n_start_molecules: self.dims.n_start_molecules,
            use_step_context: self.use_step_context,
        };
        let sidecar = sidecar_path(path);
        let text = serde_json::to_string_pretty(&meta).map_err(|e| VaeError::Meta { detail: e.to_string() })?;
        std::fs::write(&sidecar, text.as_bytes())
            .map_err(|e| VaeError::Io { path: sidecar.display().to_string(), source: e })?;
        Ok(())
    }

    /// Loads a checkpoint with its sidecar, rebuilding handles in
    /// canonical registration order.
    pub fn load(path: &Path) -> Result<Self, VaeError> {
        let sidecar = sidecar_path(path);
        let text = std::fs::read_to_string(&sidecar)
            .map_err(|e| VaeError::Io { path: sidecar.display().to_string(), source: e })?;
        let meta: ModelMeta =
            serde_json::from_str(&text).map_err(|e| VaeError::Meta { detail: e.to_string() })?;
        if meta.format_version != MODEL_META_VERSION {
            return Err(VaeError::Meta { detail: format!("unsupported format_version {}", meta.format_version) });
        }

        let dims = ModelDims {
            latent: meta.config.latent_dim,
            hidden: meta.config.hidden_dim,
            n_substructures: meta.n_substructures,
            n_templates: meta.n_templates,
            n_start_molecules: meta.n_start_molecules,
        };
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(meta.config.seed);
        let jt = JtParams::register(&mut params, &dims, &mut rng)?;
        let rxn = RxnParams::register(&mut params, &dims, &mut rng)?;

        let loaded = load_checkpoint(path)?;
        if loaded.len() != params.len() {
            return Err(VaeError::Meta {
                detail: format!("checkpoint has {} tensors, model expects {}", loaded.len(), params.len()),
            });
        }
        for idx in 0..params.len() {
            let name = params.get(crate::numerics::ParamId::from_index(idx)).name.clone();
            let src = loaded
                .id_of(&name)
                .ok_or_else(|| VaeError::Meta { detail: format!("checkpoint missing tensor {name}") })?;
            let value = loaded.get(src).value.clone();
            let dst = params.get_mut(crate::numerics::ParamId::from_index(idx));
            if value.shape() != dst.value.shape() {
                return Err(VaeError::Meta {
                    detail: format!("tensor {name}: shape {:?} vs expected {:?}", value.shape(), dst.value.shape()),
                });
            }
            dst.value = value;
        }
        Ok(Self { params, jt, rxn, dims, config: meta.config, use_step_context: meta.use_step_context })
    }

    /// Posterior means `(mu_x, mu_y)` for a training pair.
    pub fn embed(&self, vocab: &Vocabularies, pair: &TrainPair) -> Result<(Vec<f64>, Vec<f64>), VaeError> {
        self.check_vocab(vocab)?;
        let mut tape = Tape::new();
        let (_, post_x) = encode_junction(&mut tape, &self.params, &self.jt, &self.dims, &pair.junction)?;
        let post_y =
            encode_reaction(&mut tape, &self.params, &self.rxn, &self.dims, &pair.reaction, &vocab.templates)?;
        Ok((post_x.mu_values(&tape), post_y.mu_values(&tape)))
    }

    /// Node-embedding values of a junction tree under frozen parameters.
    pub fn junction_embedding_values(&self, tree: &JunctionTree) -> Result<Vec<Tensor>, VaeError> {
        let mut tape = Tape::new();
        let (h_x, _) = encode_junction(&mut tape, &self.params, &self.jt, &self.dims, tree)?;
        Ok(h_x.nodes.iter().map(|&id| tape.value(id).clone()).collect())
    }

    /// Decodes a `(junction, reaction)` pair from a pair of latent codes.
    /// Greedy when `rng` is `None`. The junction tree is decoded first,
    /// re-encoded, and its embeddings guide the reaction decoder.
    pub fn decode_pair(
        &self,
        vocab: &Vocabularies,
        z_x: &[f64],
        z_y: &[f64],
        mut rng: Option<&mut ChaCha8Rng>,
        limits: &PairLimits,
    ) -> Result<(JunctionTree, ReactionTree), VaeError> {
        let junction =
            decode_junction(&self.params, &self.jt, &self.dims, z_x, rng.as_deref_mut(), &limits.junction)?;
        let h_x = self.junction_embedding_values(&junction)?;
        let reaction = decode_reaction(
            &self.params,
            &self.rxn,
            &self.dims,
            z_y,
            &h_x,
            &vocab.templates,
            rng,
            &limits.reaction,
            self.use_step_context,
        )?;
        Ok((junction, reaction))
    }

    /// One prior sample, fully determined by `(seed, index)`.
    pub fn sample_prior_one(
        &self,
        vocab: &Vocabularies,
        seed: u64,
        index: u64,
        limits: &PairLimits,
    ) -> Result<(JunctionTree, ReactionTree), VaeError> {
        let mut rng = substream(seed, "prior", index);
        let z_x = sample_prior_values(self.dims.latent, &mut rng);
        let z_y = sample_prior_values(self.dims.latent, &mut rng);
        self.decode_pair(vocab, &z_x, &z_y, Some(&mut rng), limits)
    }

    /// `n` prior samples decoded with temperature-1 sampling.
    pub fn sample_prior(
        &self,
        vocab: &Vocabularies,
        n: usize,
        seed: u64,
        limits: &PairLimits,
    ) -> Result<Vec<(JunctionTree, ReactionTree)>, VaeError> {
        self.check_vocab(vocab)?;
        (0..n as u64).map(|i| self.sample_prior_one(vocab, seed, i, limits)).collect()
    }

    /// Runs the synthesizability protocol: `n_codes` fixed prior codes,
    /// each decoded `k_decodes` times with fresh sampling noise.
    pub fn synthesizability_eval(
        &self,
        vocab: &Vocabularies,
        backend: &dyn crate::trees::TemplateBackend,
        n_codes: usize,
        k_decodes: usize,
        seed: u64,
        limits: &PairLimits,
    ) -> Result<crate::executor::SynthReport, VaeError> {
        self.check_vocab(vocab)?;
        let mut failure: Option<VaeError> = None;
        let report = crate::executor::synthesizability_eval(n_codes, k_decodes, vocab, backend, |code, attempt| {
            let mut code_rng = substream(seed, "synth-code", code);
            let z_x = sample_prior_values(self.dims.latent, &mut code_rng);
            let z_y = sample_prior_values(self.dims.latent, &mut code_rng);
            let mut dec_rng = substream(seed, "synth-decode", code * k_decodes as u64 + attempt);
            match self.decode_pair(vocab, &z_x, &z_y, Some(&mut dec_rng), limits) {
                Ok((_, reaction)) => reaction,
                Err(e) => {
                    // decoding is total; remember the failure and emit a
                    // placeholder the executor will reject structurally
                    failure.get_or_insert(e);
                    ReactionTree { nodes: vec![], edges: vec![], root: 0 }
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        report.map_err(|e| VaeError::Meta { detail: format!("synthesizability execution failed: {e}") })
    }

    /// Greedy round trip through the posterior means.
    pub fn reconstruct(
        &self,
        vocab: &Vocabularies,
        pair: &TrainPair,
        limits: &PairLimits,
    ) -> Result<(JunctionTree, ReactionTree), VaeError> {
        let (mu_x, mu_y) = self.embed(vocab, pair)?;
        self.decode_pair(vocab, &mu_x, &mu_y, None, limits)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".json");
    std::path::PathBuf::from(s)
}

/// Decode limits for both trees of a pair.
#[derive(Debug, Clone, Copy)]
pub struct PairLimits {
    pub junction: DecodeLimits,
    pub reaction: DecodeLimits,
}

impl Default for PairLimits {
    fn default() -> Self {
        Self { junction: DecodeLimits::junction_default(), reaction: DecodeLimits::reaction_default() }
    }
}

/// Loss components of one training pair, as plain values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ElboComponents {
    pub junction: f64,
    pub reaction: f64,
    pub kl_x: f64,
    pub kl_y: f64,
    pub beta: f64,
    pub total: f64,
}

/// Builds the per-pair objective on the tape:
/// `L_junction + L_reaction + beta * (KL_x + KL_y)`,
/// with both latent codes drawn by reparameterization.
pub fn elbo_loss(
    tape: &mut Tape,
    model: &Model,
    vocab: &Vocabularies,
    pair: &TrainPair,
    beta: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(TensorId, ElboComponents), VaeError> {
    let (h_x, post_x) = encode_junction(tape, &model.params, &model.jt, &model.dims, &pair.junction)?;
    let z_x = sample_latent(tape, &post_x, rng)?;
    let l_junction =
        junction_teacher_forced_loss(tape, &model.params, &model.jt, &model.dims, &pair.junction, z_x)?;

    let post_y = encode_reaction(tape, &model.params, &model.rxn, &model.dims, &pair.reaction, &vocab.templates)?;
    let z_y = sample_latent(tape, &post_y, rng)?;
    let l_reaction = reaction_teacher_forced_loss(
        tape,
        &model.params,
        &model.rxn,
        &model.dims,
        &pair.reaction,
        z_y,
        &h_x,
        &vocab.templates,
        model.use_step_context,
    )?;

    let kl_x = kl_of(tape, &post_x)?;
    let kl_y = kl_of(tape, &post_y)?;
    let kl_sum = tape.add(kl_x, kl_y)?;
    let kl_scaled = tape.affine_const(kl_sum, beta, 0.0)?;
    let recon = tape.add(l_junction, l_reaction)?;
    let total = tape.add(recon, kl_scaled)?;

    let components = ElboComponents {
        junction: tape.scalar_value(l_junction),
        reaction: tape.scalar_value(l_reaction),
        kl_x: tape.scalar_value(kl_x),
        kl_y: tape.scalar_value(kl_y),
        beta,
        total: tape.scalar_value(total),
    };
    Ok((total, components))
}

fn kl_of(tape: &mut Tape, post: &PosteriorParams) -> Result<TensorId, NumericsError> {
    tape.kl_diag_gaussian(post.mu, post.logvar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::check_grads;
    use crate::trees::{generate_toy_dataset, validate_structure, GenConfig};

    fn tiny_config(seed: u64) -> ModelConfig {
        ModelConfig { latent_dim: 3, hidden_dim: 4, seed, ..ModelConfig::default() }
    }

    fn tiny_dataset(seed: u64) -> crate::trees::Dataset {
        generate_toy_dataset(&GenConfig {
            seed,
            n_trees: 8,
            n_templates: 3,
            n_start_molecules: 10,
            max_depth: 2,
            ..GenConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn beta_zero_total_is_exactly_the_reconstruction_sum() {
        let d = tiny_dataset(1);
        let model = Model::new(&d.vocabularies, tiny_config(2), false).unwrap();
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (_, c) = elbo_loss(&mut tape, &model, &d.vocabularies, &d.trees[0], 0.0, &mut rng).unwrap();
        assert_eq!(c.total, c.junction + c.reaction);
        assert!(c.junction >= 0.0 && c.reaction >= 0.0 && c.kl_x >= 0.0 && c.kl_y >= 0.0);
    }

    #[test]
    fn components_always_sum_to_total() {
        let d = tiny_dataset(4);
        let model = Model::new(&d.vocabularies, tiny_config(5), false).unwrap();
        for (i, pair) in d.trees.iter().enumerate() {
            let mut tape = Tape::new();
            let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
            let (_, c) = elbo_loss(&mut tape, &model, &d.vocabularies, pair, 0.7, &mut rng).unwrap();
            let want = c.junction + c.reaction + 0.7 * (c.kl_x + c.kl_y);
            assert!((c.total - want).abs() < 1e-12);
        }
    }

    #[test]
    fn elbo_gradient_passes_finite_difference_check_on_a_two_step_pair() {
        let d = tiny_dataset(6);
        let pair = d
            .trees
            .iter()
            .find(|p| p.reaction.step_count() >= 2)
            .expect("dataset contains a multi-step tree")
            .clone();
        let mut model = Model::new(&d.vocabularies, tiny_config(7), false).unwrap();
        let vocab = d.vocabularies.clone();

        let jt = model.jt;
        let rxn = model.rxn;
        let dims = model.dims;
        let usc = model.use_step_context;
        let config = model.config.clone();
        let report = check_grads(&mut model.params, 1e-5, |tape, params| {
            // rebuild a view of the model borrowing the perturbed params
            let view = Model {
                params: params.clone(),
                jt,
                rxn,
                dims,
                config: config.clone(),
                use_step_context: usc,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(99); // same eps every call
            elbo_loss(tape, &view, &vocab, &pair, 0.5, &mut rng)
                .map(|(id, _)| id)
                .map_err(|_| NumericsError::NotScalar { op: "elbo" })
        })
        .unwrap();
        assert!(report.max_rel_err <= 1e-4, "{report:?}");
    }

    #[test]
    fn sample_prior_outputs_validate_and_n_zero_is_empty() {
        let d = tiny_dataset(8);
        let model = Model::new(&d.vocabularies, tiny_config(9), false).unwrap();
        assert!(model.sample_prior(&d.vocabularies, 0, 1, &PairLimits::default()).unwrap().is_empty());
        for (junction, reaction) in model.sample_prior(&d.vocabularies, 20, 1, &PairLimits::default()).unwrap() {
            junction.validate(d.vocabularies.n_substructures()).unwrap();
            validate_structure(&reaction, &d.vocabularies.templates, d.vocabularies.n_starting_molecules())
                .unwrap();
        }
    }

    #[test]
    fn embed_is_deterministic() {
        let d = tiny_dataset(10);
        let model = Model::new(&d.vocabularies, tiny_config(11), false).unwrap();
        let a = model.embed(&d.vocabularies, &d.trees[0]).unwrap();
        let b = model.embed(&d.vocabularies, &d.trees[0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn save_load_preserves_behaviour_to_f32_rounding() {
        let d = tiny_dataset(12);
        let model = Model::new(&d.vocabularies, tiny_config(13), false).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        model.save(&path).unwrap();
        let loaded = Model::load(&path).unwrap();
        let (a_x, a_y) = model.embed(&d.vocabularies, &d.trees[0]).unwrap();
        let (b_x, b_y) = loaded.embed(&d.vocabularies, &d.trees[0]).unwrap();
        for (a, b) in a_x.iter().chain(&a_y).zip(b_x.iter().chain(&b_y)) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        // and the checkpoint round-trips bit-exactly
        let path2 = dir.path().join("m2.ckpt");
        loaded.save(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }
}
