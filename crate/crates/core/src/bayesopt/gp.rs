//! Exact Gaussian-process regression with an RBF kernel.
//!
//! Targets are centered internally, so the prior mean is the sample
//! mean. Hyperparameters are fitted by multi-start gradient ascent on
//! the log marginal likelihood; to keep fitting cheap the likelihood is
//! evaluated on a deterministic subsample while the final model
//! conditions on every point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::linalg::{Cholesky, SymMatrix};
use super::GpError;

const JITTER_MAX: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyper {
    pub lengthscale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
}

impl GpHyper {
    /// Data-driven starting point: median pairwise distance and target
    /// variance.
    pub fn from_data(z: &[Vec<f64>], y: &[f64]) -> Self {
        let var = variance(y).max(1e-4);
        Self { lengthscale: median_distance(z).max(1e-3), signal_var: var, noise_var: 0.1 * var }
    }
}

#[derive(Debug, Clone)]
pub struct GpOptions {
    pub restarts: usize,
    pub iters: usize,
    /// When false the noise variance stays at its initial value.
    pub fit_noise: bool,
    /// Points used for the marginal-likelihood objective.
    pub fit_subset: usize,
    pub seed: u64,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self { restarts: 8, iters: 80, fit_noise: true, fit_subset: 160, seed: 0 }
    }
}

/// A fitted GP: kernel hyperparameters plus the Cholesky factor of
/// `K + noise I` over the training inputs.
#[derive(Debug, Clone)]
pub struct GpModel {
    z: Vec<Vec<f64>>,
    y_mean: f64,
    alpha: Vec<f64>,
    chol: Cholesky,
    pub hyper: GpHyper,
    pub jitter: f64,
}

impl GpModel {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn prior_variance(&self) -> f64 {
        self.hyper.signal_var + self.hyper.noise_var
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kernel(hyper: &GpHyper, a: &[f64], b: &[f64]) -> f64 {
    hyper.signal_var * (-sq_dist(a, b) / (2.0 * hyper.lengthscale * hyper.lengthscale)).exp()
}

fn variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

fn median_distance(z: &[Vec<f64>]) -> f64 {
    let mut dists: Vec<f64> = Vec::new();
    let step = (z.len() / 64).max(1); // subsample pairs on large sets
    for i in (0..z.len()).step_by(step) {
        for j in (i + 1..z.len()).step_by(step) {
            dists.push(sq_dist(&z[i], &z[j]).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    dists[dists.len() / 2]
}

/// Builds `K + (noise + jitter) I` and factorizes it, raising the jitter
/// by decades up to `JITTER_MAX` when the factorization fails.
fn factor_kernel(z: &[Vec<f64>], hyper: &GpHyper) -> Result<(Cholesky, f64), GpError> {
    let n = z.len();
    let mut k = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            k.set(i, j, kernel(hyper, &z[i], &z[j]));
        }
    }
    let mut jitter = 0.0;
    loop {
        let mut kj = k.clone();
        for i in 0..n {
            let v = kj.get(i, i) + hyper.noise_var + jitter;
            kj.set(i, i, v);
        }
        match Cholesky::factor(&kj) {
            Ok(chol) => return Ok((chol, jitter)),
            Err(e) => {
                jitter = if jitter == 0.0 { 1e-12 } else { jitter * 10.0 };
                if jitter > JITTER_MAX {
                    return Err(e);
                }
            }
        }
    }
}

/// Log marginal likelihood and its gradient in
/// `(ln lengthscale, ln signal_var, ln noise_var)`.
fn lml_and_grad(z: &[Vec<f64>], y_centered: &[f64], hyper: &GpHyper) -> Result<(f64, [f64; 3]), GpError> {
    let n = z.len();
    let (chol, _) = factor_kernel(z, hyper)?;
    let alpha = chol.solve(y_centered);
    let fit: f64 = y_centered.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let lml = -0.5 * fit - 0.5 * chol.log_det() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // K^{-1} column by column
    let mut kinv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for c in 0..n {
        e[c] = 1.0;
        let col = chol.solve(&e);
        for r in 0..n {
            kinv[r * n + c] = col[r];
        }
        e[c] = 0.0;
    }

    // dL/dtheta = 0.5 tr((alpha alpha^T - K^{-1}) dK/dtheta)
    let ell2 = hyper.lengthscale * hyper.lengthscale;
    let mut grad = [0.0f64; 3];
    for i in 0..n {
        for j in 0..n {
            let m = alpha[i] * alpha[j] - kinv[i * n + j];
            let kf = kernel(hyper, &z[i], &z[j]);
            let d2 = sq_dist(&z[i], &z[j]);
            grad[0] += 0.5 * m * kf * d2 / ell2; // d/d ln(lengthscale)
            grad[1] += 0.5 * m * kf; // d/d ln(signal_var)
            if i == j {
                grad[2] += 0.5 * m * hyper.noise_var; // d/d ln(noise_var)
            }
        }
    }
    Ok((lml, grad))
}

/// Fits hyperparameters by multi-start gradient ascent and conditions
/// the returned model on all of `(z, y)`.
pub fn gp_fit(z: &[Vec<f64>], y: &[f64], init: GpHyper, opts: &GpOptions) -> Result<GpModel, GpError> {
    if z.len() < 2 || z.len() != y.len() {
        return Err(GpError::InsufficientData { n: z.len() });
    }
    let dim = z[0].len();
    if z.iter().any(|row| row.len() != dim) {
        return Err(GpError::InsufficientData { n: z.len() });
    }
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let y_centered: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

    // deterministic evenly-spaced subsample for the objective
    let m = opts.fit_subset.max(2).min(z.len());
    let idx: Vec<usize> = (0..m).map(|k| k * z.len() / m).collect();
    let zs: Vec<Vec<f64>> = idx.iter().map(|&i| z[i].clone()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| y_centered[i]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(f64, GpHyper)> = None;
    for restart in 0..opts.restarts.max(1) {
        let scale = |rng: &mut ChaCha8Rng| (rng.random_range(-1.2..1.2f64)).exp();
        let mut theta = [
            (init.lengthscale * if restart == 0 { 1.0 } else { scale(&mut rng) }).ln(),
            (init.signal_var * if restart == 0 { 1.0 } else { scale(&mut rng) }).ln(),
            (init.noise_var.max(1e-9) * if restart == 0 { 1.0 } else { scale(&mut rng) }).ln(),
        ];
        // Adam ascent on the three log-parameters
        let (mut m1, mut m2) = ([0.0f64; 3], [0.0f64; 3]);
        let (b1, b2, lr) = (0.9, 0.999, 0.08);
        let mut last_lml = f64::NEG_INFINITY;
        for t in 1..=opts.iters {
            let hyper = GpHyper {
                lengthscale: theta[0].exp(),
                signal_var: theta[1].exp(),
                noise_var: if opts.fit_noise { theta[2].exp() } else { init.noise_var },
            };
            let Ok((lml, grad)) = lml_and_grad(&zs, &ys, &hyper) else { break };
            last_lml = lml;
            let upto = if opts.fit_noise { 3 } else { 2 };
            for k in 0..upto {
                m1[k] = b1 * m1[k] + (1.0 - b1) * grad[k];
                m2[k] = b2 * m2[k] + (1.0 - b2) * grad[k] * grad[k];
                let mh = m1[k] / (1.0 - b1.powi(t as i32));
                let vh = m2[k] / (1.0 - b2.powi(t as i32));
                theta[k] += lr * mh / (vh.sqrt() + 1e-8);
            }
            // keep parameters in sane numeric ranges
            theta[0] = theta[0].clamp(-7.0, 7.0);
            theta[1] = theta[1].clamp(-12.0, 7.0);
            theta[2] = theta[2].clamp(-21.0, 7.0);
        }
        let hyper = GpHyper {
            lengthscale: theta[0].exp(),
            signal_var: theta[1].exp(),
            noise_var: if opts.fit_noise { theta[2].exp() } else { init.noise_var },
        };
        if lml_and_grad(&zs, &ys, &hyper).is_ok()
            && best.as_ref().is_none_or(|(b, _)| last_lml > *b)
        {
            best = Some((last_lml, hyper));
        }
    }

    let hyper = best.map(|(_, h)| h).unwrap_or(init);
    let (chol, jitter) = factor_kernel(z, &hyper)?;
    let alpha = chol.solve(&y_centered);
    Ok(GpModel { z: z.to_vec(), y_mean, alpha, chol, hyper, jitter })
}

/// Conditions on `(z, y)` with fixed hyperparameters (no fitting).
pub fn gp_condition(z: &[Vec<f64>], y: &[f64], hyper: GpHyper) -> Result<GpModel, GpError> {
    if z.len() < 2 || z.len() != y.len() {
        return Err(GpError::InsufficientData { n: z.len() });
    }
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let y_centered: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let (chol, jitter) = factor_kernel(z, &hyper)?;
    let alpha = chol.solve(&y_centered);
    Ok(GpModel { z: z.to_vec(), y_mean, alpha, chol, hyper, jitter })
}

/// Closed-form posterior `(mean, variance)` at `z_star`. The variance
/// includes the noise term and is clamped to zero below 1e-12.
pub fn gp_predict(model: &GpModel, z_star: &[f64]) -> (f64, f64) {
    let k_star: Vec<f64> = model.z.iter().map(|zi| kernel(&model.hyper, zi, z_star)).collect();
    let mean = model.y_mean + k_star.iter().zip(&model.alpha).map(|(a, b)| a * b).sum::<f64>();
    let v = model.chol.solve_lower(&k_star);
    let reduction: f64 = v.iter().map(|x| x * x).sum();
    let mut var = model.hyper.signal_var + model.hyper.noise_var - reduction;
    if var < 1e-12 {
        var = 0.0;
    }
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesopt::linalg::solve_dense_pivoting;

    fn grid_1d(n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![lo + (hi - lo) * i as f64 / (n - 1) as f64]).collect()
    }

    #[test]
    fn constant_targets_predict_the_constant() {
        let z = grid_1d(10, -2.0, 2.0);
        let y = vec![3.25; 10];
        let model = gp_fit(&z, &y, GpHyper { lengthscale: 1.0, signal_var: 1.0, noise_var: 0.01 }, &GpOptions::default())
            .unwrap();
        for q in [-3.0, 0.0, 1.7, 10.0] {
            let (mean, _) = gp_predict(&model, &[q]);
            assert!((mean - 3.25).abs() < 1e-6, "at {q}: {mean}");
        }
        assert!(model.hyper.signal_var < 1.0, "signal variance should shrink: {}", model.hyper.signal_var);
    }

    #[test]
    fn zero_noise_interpolates_training_targets() {
        let z = grid_1d(8, -2.0, 2.0);
        let y: Vec<f64> = z.iter().map(|p| (1.3 * p[0]).sin()).collect();
        let opts = GpOptions { fit_noise: false, ..GpOptions::default() };
        let model =
            gp_fit(&z, &y, GpHyper { lengthscale: 1.0, signal_var: 1.0, noise_var: 0.0 }, &opts).unwrap();
        for (zi, yi) in z.iter().zip(&y) {
            let (mean, var) = gp_predict(&model, zi);
            assert!((mean - yi).abs() < 1e-6, "{mean} vs {yi}");
            assert!(var < 1e-4);
        }
    }

    #[test]
    fn far_from_data_reverts_to_prior() {
        let z = grid_1d(6, 0.0, 1.0);
        let y = vec![1.0, 2.0, 0.5, 1.5, 1.0, 2.5];
        let hyper = GpHyper { lengthscale: 0.3, signal_var: 2.0, noise_var: 0.1 };
        let model = gp_condition(&z, &y, hyper).unwrap();
        let (mean, var) = gp_predict(&model, &[0.5 + 10.0 * 0.3]);
        let y_mean = y.iter().sum::<f64>() / 6.0;
        assert!((mean - y_mean).abs() < 1e-3);
        assert!((var - (2.0 + 0.1)).abs() < 1e-3);
    }

    #[test]
    fn sine_regression_has_low_held_out_rmse() {
        // y = sin(z) on 30 training points; RMSE on a held-out grid < 0.1
        let z = grid_1d(30, -3.0, 3.0);
        let y: Vec<f64> = z.iter().map(|p| p[0].sin()).collect();
        let init = GpHyper::from_data(&z, &y);
        let model = gp_fit(&z, &y, init, &GpOptions { seed: 3, ..GpOptions::default() }).unwrap();
        let test = grid_1d(53, -2.9, 2.9);
        let mse: f64 = test
            .iter()
            .map(|p| {
                let (mean, _) = gp_predict(&model, p);
                (mean - p[0].sin()).powi(2)
            })
            .sum::<f64>()
            / test.len() as f64;
        assert!(mse.sqrt() < 0.1, "rmse {}", mse.sqrt());
    }

    #[test]
    fn cholesky_path_matches_naive_dense_solve() {
        let z = grid_1d(12, -1.0, 1.0);
        let y: Vec<f64> = z.iter().map(|p| p[0] * p[0]).collect();
        let hyper = GpHyper { lengthscale: 0.7, signal_var: 1.3, noise_var: 0.05 };
        let model = gp_condition(&z, &y, hyper).unwrap();

        // naive route: full K + noise, pivoted elimination, direct forms
        let n = z.len();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        let mut k = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut v = kernel(&hyper, &z[i], &z[j]);
                if i == j {
                    v += hyper.noise_var + model.jitter;
                }
                k.set(i, j, v);
            }
        }
        let alpha = solve_dense_pivoting(&k, &yc).unwrap();
        for q in [-0.9, -0.2, 0.33, 0.95] {
            let ks: Vec<f64> = z.iter().map(|zi| kernel(&hyper, zi, &[q])).collect();
            let want_mean = y_mean + ks.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>();
            let kinv_ks = solve_dense_pivoting(&k, &ks).unwrap();
            let want_var =
                hyper.signal_var + hyper.noise_var - ks.iter().zip(&kinv_ks).map(|(a, b)| a * b).sum::<f64>();
            let (mean, var) = gp_predict(&model, &[q]);
            assert!((mean - want_mean).abs() < 1e-8, "{mean} vs {want_mean}");
            assert!((var - want_var.max(0.0)).abs() < 1e-8, "{var} vs {want_var}");
        }
    }

    #[test]
    fn posterior_variance_never_exceeds_prior() {
        let z = grid_1d(15, -2.0, 2.0);
        let y: Vec<f64> = z.iter().map(|p| p[0].cos()).collect();
        let model =
            gp_condition(&z, &y, GpHyper { lengthscale: 0.5, signal_var: 1.0, noise_var: 0.01 }).unwrap();
        for k in 0..200 {
            let q = -5.0 + 0.05 * k as f64;
            let (_, var) = gp_predict(&model, &[q]);
            assert!(var <= model.prior_variance() + 1e-9);
            assert!(var >= 0.0);
        }
    }

    #[test]
    fn insufficient_data_is_rejected() {
        let err = gp_fit(&[vec![0.0]], &[1.0], GpHyper { lengthscale: 1.0, signal_var: 1.0, noise_var: 0.1 }, &GpOptions::default());
        assert!(matches!(err, Err(GpError::InsufficientData { n: 1 })));
    }
}
