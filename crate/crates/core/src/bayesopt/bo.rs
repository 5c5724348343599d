//! Batched Bayesian optimization over the VAE's latent space.
//!
//! Training pairs are embedded at their posterior means, a GP maps the
//! concatenated codes `[z_y, z_x]` to property scores, and each
//! iteration proposes the candidates with the highest expected
//! improvement, decodes them greedily, executes, and feeds valid scores
//! back into the GP data.

use serde::{Deserialize, Serialize};

use crate::executor::{execute, ExecutorError};
use crate::trees::{JunctionTree, ReactionTree, TemplateBackend, Vocabularies};
use crate::util::substream;
use crate::vae::{Model, PairLimits, VaeError};

use super::ei::expected_improvement;
use super::gp::{gp_fit, GpHyper, GpOptions};
use super::GpError;
use crate::codec::sample_prior_values;

#[derive(Debug, Clone)]
pub struct BoConfig {
    pub iterations: usize,
    pub batch_per_iter: usize,
    /// Candidates scored by EI per iteration: half fresh prior draws,
    /// half perturbations of the current top codes.
    pub candidate_pool: usize,
    /// GP conditions on at most this many best-scoring points.
    pub subset_size: usize,
    pub perturb_sigma: f64,
    pub top_k_seeds: usize,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            iterations: 5,
            batch_per_iter: 50,
            candidate_pool: 2000,
            subset_size: 1500,
            perturb_sigma: 0.3,
            top_k_seeds: 20,
            seed: 0,
        }
    }
}

/// One evaluated proposal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoRecord {
    pub iter: usize,
    pub z: Vec<f64>,
    pub junction: JunctionTree,
    pub reaction: ReactionTree,
    pub product: Option<String>,
    pub score: Option<f64>,
    pub valid: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BoIterStats {
    pub iter: usize,
    pub proposed: usize,
    pub valid: usize,
    pub best_score_so_far: f64,
}

#[derive(Debug, Default)]
pub struct BoRun {
    pub records: Vec<BoRecord>,
    pub iters: Vec<BoIterStats>,
}

impl BoRun {
    /// Scores of valid evaluations, descending.
    pub fn sorted_scores(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.records.iter().filter_map(|r| r.score).collect();
        s.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BoError {
    #[error(transparent)]
    Vae(#[from] VaeError),
    #[error(transparent)]
    Executor(#[from] ExecutorError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("bayesian optimization needs a non-empty dataset")]
    EmptyData,
}

/// The toy property score: occurrences of the token 'Q' in the product,
/// penalized by a tenth of its length.
pub fn toy_scorer(product: &str) -> f64 {
    product.bytes().filter(|&b| b == b'Q').count() as f64 - 0.1 * product.len() as f64
}

/// Embeds every training pair at its posterior means as `[z_y, z_x]`.
pub fn embed_training_codes(
    model: &Model,
    vocab: &Vocabularies,
    pairs: &[crate::trees::TrainPair],
) -> Result<Vec<Vec<f64>>, VaeError> {
    pairs
        .iter()
        .map(|pair| {
            let (mu_x, mu_y) = model.embed(vocab, pair)?;
            let mut z = mu_y;
            z.extend(mu_x);
            Ok(z)
        })
        .collect()
}

fn decode_and_score(
    model: &Model,
    vocab: &Vocabularies,
    backend: &dyn TemplateBackend,
    scorer: &dyn Fn(&str) -> f64,
    limits: &PairLimits,
    iter: usize,
    z: Vec<f64>,
) -> Result<BoRecord, BoError> {
    let d = model.dims.latent;
    let (z_y, z_x) = z.split_at(d);
    // greedy decode so proposals are a pure function of the code
    let (junction, reaction) = model.decode_pair(vocab, z_x, z_y, None, limits)?;
    let result = execute(&reaction, vocab, backend)?;
    let product = result.product;
    let score = product.as_deref().map(scorer);
    Ok(BoRecord { iter, z, junction, reaction, valid: product.is_some(), product, score })
}

/// Equal-budget random-search baseline: `n` prior codes decoded and
/// scored exactly like BO proposals.
pub fn random_search(
    model: &Model,
    vocab: &Vocabularies,
    backend: &dyn TemplateBackend,
    scorer: &dyn Fn(&str) -> f64,
    n: usize,
    seed: u64,
    limits: &PairLimits,
) -> Result<BoRun, BoError> {
    let mut run = BoRun::default();
    for i in 0..n {
        let mut rng = substream(seed, "random-search", i as u64);
        let z = sample_prior_values(2 * model.dims.latent, &mut rng);
        run.records.push(decode_and_score(model, vocab, backend, scorer, limits, 0, z)?);
    }
    Ok(run)
}

/// The batched BO loop. Deterministic given `config.seed`; iterations
/// without a single valid decode are logged and the loop continues.
pub fn bo_loop(
    model: &Model,
    vocab: &Vocabularies,
    dataset: &crate::trees::Dataset,
    backend: &dyn TemplateBackend,
    scorer: &dyn Fn(&str) -> f64,
    config: &BoConfig,
    limits: &PairLimits,
) -> Result<BoRun, BoError> {
    if dataset.trees.is_empty() {
        return Err(BoError::EmptyData);
    }
    model.check_vocab(vocab)?;
    let dim = 2 * model.dims.latent;

    let mut codes = embed_training_codes(model, vocab, &dataset.trees)?;
    let mut scores: Vec<f64> = dataset.trees.iter().map(|p| scorer(p.product.as_str())).collect();

    let mut run = BoRun::default();
    for iter in 0..config.iterations {
        // subset-of-data GP: half the budget goes to the best scorers,
        // half to an evenly-spaced slice of the rest so the surrogate
        // still knows what a bad region looks like
        let mut order: Vec<usize> = (0..codes.len()).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite").then(a.cmp(&b)));
        let cap = config.subset_size.max(2).min(order.len());
        if order.len() > cap {
            let top = cap / 2;
            let rest = &order[top..];
            let need = cap - top;
            let mut keep = order[..top].to_vec();
            keep.extend((0..need).map(|k| rest[k * rest.len() / need]));
            order = keep;
        }
        let z_fit: Vec<Vec<f64>> = order.iter().map(|&i| codes[i].clone()).collect();
        let y_fit: Vec<f64> = order.iter().map(|&i| scores[i]).collect();

        let gp = gp_fit(
            &z_fit,
            &y_fit,
            GpHyper::from_data(&z_fit, &y_fit),
            &GpOptions { seed: substream_seed(config.seed, iter), ..GpOptions::default() },
        )?;
        let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        // candidate pool: fresh prior draws plus perturbations of the
        // current top codes. The perturbation is scaled by the observed
        // per-dimension spread of the codes: embeddings concentrate well
        // inside the unit ball, and an absolute step would leave every
        // candidate outside the surrogate's correlation range.
        let mut dim_std = vec![0.0f64; dim];
        for k in 0..dim {
            let mean: f64 = codes.iter().map(|z| z[k]).sum::<f64>() / codes.len() as f64;
            let var: f64 = codes.iter().map(|z| (z[k] - mean) * (z[k] - mean)).sum::<f64>() / codes.len() as f64;
            dim_std[k] = var.sqrt().max(1e-3);
        }
        let mut rng = substream(config.seed, "bo-candidates", iter as u64);
        let n_prior = config.candidate_pool / 2;
        let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(config.candidate_pool);
        for _ in 0..n_prior {
            candidates.push(sample_prior_values(dim, &mut rng));
        }
        let top = &order[..order.len().min(config.top_k_seeds)];
        for k in n_prior..config.candidate_pool {
            let base = &codes[top[(k - n_prior) % top.len()]];
            let noise = sample_prior_values(dim, &mut rng);
            candidates.push(
                base.iter()
                    .zip(&noise)
                    .zip(&dim_std)
                    .map(|((b, n), s)| b + config.perturb_sigma * s * n)
                    .collect(),
            );
        }

        let mut ranked: Vec<(f64, usize)> = candidates
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let (mean, var) = super::gp_predict(&gp, z);
                (expected_improvement(mean, var, best), i)
            })
            .collect();
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite EI").then(a.1.cmp(&b.1)));

        let mut stats = BoIterStats { iter, proposed: 0, valid: 0, best_score_so_far: best };
        for &(_, idx) in ranked.iter().take(config.batch_per_iter) {
            let record =
                decode_and_score(model, vocab, backend, scorer, limits, iter, candidates[idx].clone())?;
            stats.proposed += 1;
            if let Some(score) = record.score {
                stats.valid += 1;
                codes.push(record.z.clone());
                scores.push(score);
                stats.best_score_so_far = stats.best_score_so_far.max(score);
            }
            run.records.push(record);
        }
        run.iters.push(stats);
    }
    Ok(run)
}

fn substream_seed(seed: u64, iter: usize) -> u64 {
    use rand::RngCore;
    substream(seed, "bo-gp", iter as u64).next_u64()
}
