//! Expected improvement under a Gaussian posterior (maximization).

/// `EI = (mu - best) Phi(u) + sigma phi(u)` with `u = (mu - best)/sigma`;
/// at `sigma = 0` it degenerates to `max(mu - best, 0)`.
pub fn expected_improvement(mean: f64, variance: f64, best_so_far: f64) -> f64 {
    debug_assert!(variance >= 0.0);
    let sigma = variance.max(0.0).sqrt();
    let delta = mean - best_so_far;
    if sigma == 0.0 {
        return delta.max(0.0);
    }
    let u = delta / sigma;
    (delta * normal_cdf(u) + sigma * normal_pdf(u)).max(0.0)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Abramowitz & Stegun 7.1.26 rational approximation, absolute error
/// below 1.5e-7 — comfortably inside every tolerance used here.
fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-9);
        assert!((normal_cdf(1.96) - 0.9750021).abs() < 1e-6);
        assert!((normal_cdf(-1.0) - 0.1586553).abs() < 1e-6);
    }

    #[test]
    fn zero_variance_closed_forms() {
        assert_eq!(expected_improvement(1.0, 0.0, 2.0), 0.0);
        assert_eq!(expected_improvement(2.0, 0.0, 2.0), 0.0);
        assert_eq!(expected_improvement(3.0, 0.0, 2.0), 1.0);
    }

    #[test]
    fn at_the_incumbent_ei_is_sigma_times_pdf_zero() {
        // mu = best, sigma = 1: EI = phi(0) ~ 0.398942
        let ei = expected_improvement(0.0, 1.0, 0.0);
        assert!((ei - 0.3989422804014327).abs() < 1e-7, "{ei}");
    }

    #[test]
    fn matches_monte_carlo_estimate() {
        // E[max(X - best, 0)], X ~ N(mu, sigma^2), a million draws
        let cases = [(0.3, 1.3, 0.8), (-0.5, 0.4, 0.0), (1.0, 2.0, 2.5)];
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for (mu, var, best) in cases {
            let sigma = f64::sqrt(var);
            let n = 1_000_000;
            let mc: f64 = (0..n)
                .map(|_| {
                    let x: f64 = rng.sample(StandardNormal);
                    (mu + sigma * x - best).max(0.0)
                })
                .sum::<f64>()
                / n as f64;
            let ei = expected_improvement(mu, var, best);
            assert!((ei - mc).abs() < 1e-3, "mu={mu} var={var} best={best}: {ei} vs {mc}");
        }
    }

    #[test]
    fn monotone_in_mean_and_in_sigma_below_incumbent() {
        let best = 1.0;
        let mut prev = expected_improvement(-2.0, 0.5, best);
        for k in 1..40 {
            let mu = -2.0 + 0.1 * k as f64;
            let ei = expected_improvement(mu, 0.5, best);
            assert!(ei >= prev - 1e-12, "not nondecreasing in mean at {mu}");
            prev = ei;
        }
        // mu below best: more uncertainty means more improvement mass
        let mut prev = expected_improvement(0.0, 1e-6, best);
        for k in 1..40 {
            let var = k as f64 * 0.1;
            let ei = expected_improvement(0.0, var, best);
            assert!(ei >= prev - 1e-12, "not nondecreasing in sigma at {var}");
            prev = ei;
        }
    }

    #[test]
    fn ei_is_nonnegative_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let mu = rng.random_range(-10.0..10.0);
            let var = rng.random_range(0.0..9.0);
            let best = rng.random_range(-10.0..10.0);
            assert!(expected_improvement(mu, var, best) >= 0.0);
        }
    }
}
