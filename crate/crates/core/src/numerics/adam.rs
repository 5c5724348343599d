//! Adam optimizer with bias correction.

use super::params::ParamSet;
use super::NumericsError;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// Per-parameter first/second moment buffers plus the shared step counter.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    moments: Vec<Moment>,
}

#[derive(Debug, Clone)]
struct Moment {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, step: 0, moments: Vec::new() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update over every parameter; gradients are
    /// consumed (zeroed) afterwards.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<(), NumericsError> {
        if !params.has_grads {
            return Err(NumericsError::MissingGrads);
        }
        while self.moments.len() < params.len() {
            let idx = self.moments.len();
            let n = params.iter().nth(idx).map(|(_, p)| p.value.len()).unwrap_or(0);
            self.moments.push(Moment { m: vec![0.0; n], v: vec![0.0; n] });
        }
        self.step += 1;
        let t = self.step as i32;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);

        for idx in 0..params.len() {
            let slot = &mut self.moments[idx];
            let p = params.get_mut(super::params::ParamId(idx));
            for ((w, g), (m, v)) in p
                .value
                .as_mut_slice()
                .iter_mut()
                .zip(&p.grad)
                .zip(slot.m.iter_mut().zip(slot.v.iter_mut()))
            {
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
        params.zero_grads();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Grads, Tape, Tensor};

    fn quad_params(w0: Vec<f64>) -> (ParamSet, crate::numerics::ParamId) {
        let mut params = ParamSet::new();
        let id = params.add("w", Tensor::vector(w0)).unwrap();
        (params, id)
    }

    #[test]
    fn first_step_moves_by_lr_sign() {
        let (mut params, id) = quad_params(vec![1.0, -2.0]);
        let mut adam = Adam::new(AdamConfig::default());
        params.get_mut(id).grad = vec![3.0, -0.5];
        params.has_grads = true;
        adam.step(&mut params).unwrap();
        let w = params.get(id).value.as_slice();
        // magnitude ~ lr regardless of grad magnitude, sign opposes grad
        assert!((w[0] - (1.0 - 0.001)).abs() < 1e-6);
        assert!((w[1] - (-2.0 + 0.001)).abs() < 1e-6);
    }

    #[test]
    fn zero_grad_leaves_params_unchanged() {
        let (mut params, id) = quad_params(vec![0.7]);
        let mut adam = Adam::new(AdamConfig::default());
        params.has_grads = true; // populated with zeros
        adam.step(&mut params).unwrap();
        assert_eq!(params.get(id).value.as_slice(), &[0.7]);
    }

    #[test]
    fn missing_grads_is_an_error() {
        let (mut params, _) = quad_params(vec![0.7]);
        let mut adam = Adam::new(AdamConfig::default());
        assert!(matches!(adam.step(&mut params), Err(NumericsError::MissingGrads)));
    }

    #[test]
    fn quadratic_norm_strictly_decreases() {
        // f(w) = |w|^2 from w = [1, 1]; 100 steps of Adam.
        let (mut params, id) = quad_params(vec![1.0, 1.0]);
        let mut adam = Adam::new(AdamConfig::default());
        let norm = |params: &ParamSet| -> f64 {
            params.get(id).value.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        let mut prev = norm(&params);
        for _ in 0..100 {
            let mut tape = Tape::new();
            let w = tape.param(&params, id).unwrap();
            let sq = tape.mul(w, w).unwrap();
            let loss = tape.sum_elems(sq).unwrap();
            let grads: Grads = tape.backward(loss).unwrap();
            params.accumulate(&grads);
            adam.step(&mut params).unwrap();
            let cur = norm(&params);
            assert!(cur < prev, "norm increased: {cur} >= {prev}");
            prev = cur;
        }
    }
}
