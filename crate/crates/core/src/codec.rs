//! Shared pieces of the two tree codecs: size bundles, decode limits,
//! posterior parameters, and the reparameterized sampler.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::{NumericsError, Tape, Tensor, TensorId};

/// Every dimension the codecs need.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub latent: usize,
    pub hidden: usize,
    pub n_substructures: usize,
    pub n_templates: usize,
    pub n_start_molecules: usize,
}

/// Hard bounds that keep free-running decoders terminating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeLimits {
    pub max_nodes: usize,
    /// Reaction-step nesting bound; junction decoding ignores it.
    pub max_depth: usize,
}

impl DecodeLimits {
    pub fn junction_default() -> Self {
        Self { max_nodes: 40, max_depth: usize::MAX }
    }

    pub fn reaction_default() -> Self {
        Self { max_nodes: 50, max_depth: 5 }
    }
}

/// Mean and log-variance of a diagonal Gaussian posterior, as tape nodes.
#[derive(Debug, Clone, Copy)]
pub struct PosteriorParams {
    pub mu: TensorId,
    pub logvar: TensorId,
}

impl PosteriorParams {
    pub fn mu_values(&self, tape: &Tape) -> Vec<f64> {
        tape.value(self.mu).as_slice().to_vec()
    }

    pub fn logvar_values(&self, tape: &Tape) -> Vec<f64> {
        tape.value(self.logvar).as_slice().to_vec()
    }
}

/// Draws `z = mu + exp(logvar / 2) * eps` with `eps ~ N(0, I)` on the
/// tape, so gradients flow into both posterior heads.
pub fn sample_latent(
    tape: &mut Tape,
    post: &PosteriorParams,
    rng: &mut ChaCha8Rng,
) -> Result<TensorId, NumericsError> {
    let d = tape.value(post.mu).len();
    let eps: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let eps = tape.constant(Tensor::vector(eps))?;
    let half = tape.affine_const(post.logvar, 0.5, 0.0)?;
    let sigma = tape.exp(half)?;
    let noise = tape.mul(sigma, eps)?;
    tape.add(post.mu, noise)
}

/// Plain-value reparameterized draw for inference-time decoding.
pub fn sample_latent_values(mu: &[f64], logvar: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    mu.iter()
        .zip(logvar)
        .map(|(m, lv)| m + (0.5 * lv).exp() * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// A standard-normal vector of length `d`.
pub fn sample_prior_values(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Inverse-CDF draw from an unnormalized weight vector.
pub(crate) fn sample_weighted(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0, "sampling from an all-zero weight vector");
    let mut u: f64 = rng.random_range(0.0..1.0) * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Greedy or sampled choice over logits, with an optional disallowed
/// class whose probability is forced to zero.
pub(crate) fn pick_label(
    logits: &[f64],
    masked: Option<usize>,
    rng: Option<&mut ChaCha8Rng>,
) -> usize {
    match rng {
        None => {
            let mut best: Option<usize> = None;
            for (i, v) in logits.iter().enumerate() {
                if Some(i) == masked {
                    continue;
                }
                if best.is_none_or(|b| *v > logits[b]) {
                    best = Some(i);
                }
            }
            best.expect("pick_label over empty class set")
        }
        Some(rng) => {
            let mut probs = crate::numerics::softmax_slice(logits);
            if let Some(m) = masked {
                probs[m] = 0.0;
            }
            sample_weighted(&probs, rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn degenerate_variance_collapses_to_mu() {
        let mut tape = Tape::new();
        let mu = tape.constant(Tensor::vector(vec![0.3, -1.2])).unwrap();
        let lv = tape.constant(Tensor::vector(vec![-40.0, -40.0])).unwrap();
        let post = PosteriorParams { mu, logvar: lv };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = sample_latent(&mut tape, &post, &mut rng).unwrap();
        let zs = tape.value(z).as_slice();
        assert!((zs[0] - 0.3).abs() < 1e-8 && (zs[1] + 1.2).abs() < 1e-8);
    }

    #[test]
    fn fixed_seed_reproduces_z() {
        let draw = || {
            let mut tape = Tape::new();
            let mu = tape.constant(Tensor::vector(vec![0.0; 4])).unwrap();
            let lv = tape.constant(Tensor::vector(vec![0.0; 4])).unwrap();
            let post = PosteriorParams { mu, logvar: lv };
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let z = sample_latent(&mut tape, &post, &mut rng).unwrap();
            tape.value(z).as_slice().to_vec()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn monte_carlo_mean_approaches_mu() {
        let n = 100_000;
        let mu = [1.5, -0.5];
        let lv = [0.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut sums = [0.0f64; 2];
        for _ in 0..n {
            let z = sample_latent_values(&mu, &lv, &mut rng);
            sums[0] += z[0];
            sums[1] += z[1];
        }
        for k in 0..2 {
            let mean = sums[k] / n as f64;
            let sigma = (0.5 * lv[k] as f64).exp();
            let bound = 4.0 * sigma / (n as f64).sqrt();
            assert!((mean - mu[k]).abs() < bound, "dim {k}: {mean} vs {}", mu[k]);
        }
    }

    #[test]
    fn greedy_pick_breaks_ties_low() {
        assert_eq!(pick_label(&[0.5, 0.5, 0.1], None, None), 0);
        assert_eq!(pick_label(&[0.1, 0.9, 0.9], None, None), 1);
    }

    #[test]
    fn masked_pick_never_returns_the_masked_class() {
        let logits = vec![10.0, 0.0, -1.0];
        assert_eq!(pick_label(&logits, Some(0), None), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            assert_ne!(pick_label(&logits, Some(0), Some(&mut rng)), 0);
        }
    }
}
