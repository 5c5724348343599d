//! Layer parameter bundles and the GRU cell.

use rand_chacha::ChaCha8Rng;

use super::params::{ParamId, ParamSet};
use super::tape::{Tape, TensorId};
use super::NumericsError;

/// Handles for a `W x + b` layer registered in a [`ParamSet`].
#[derive(Debug, Clone, Copy)]
pub struct LinearParams {
    pub w: ParamId,
    pub b: ParamId,
}

impl LinearParams {
    pub fn register(
        params: &mut ParamSet,
        prefix: &str,
        out_dim: usize,
        in_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, NumericsError> {
        Ok(Self {
            w: params.add_matrix(format!("{prefix}.w"), out_dim, in_dim, rng)?,
            b: params.add_zero_vector(format!("{prefix}.b"), out_dim)?,
        })
    }

    pub fn apply(&self, tape: &mut Tape, params: &ParamSet, x: TensorId) -> Result<TensorId, NumericsError> {
        let w = tape.param(params, self.w)?;
        let b = tape.param(params, self.b)?;
        tape.linear(w, b, x)
    }
}

/// Gate weights for one GRU cell over `[input, hidden]` concatenations.
#[derive(Debug, Clone, Copy)]
pub struct GruParams {
    pub wz: ParamId,
    pub bz: ParamId,
    pub wr: ParamId,
    pub br: ParamId,
    pub wh: ParamId,
    pub bh: ParamId,
}

impl GruParams {
    pub fn register(
        params: &mut ParamSet,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, NumericsError> {
        let cat = input_dim + hidden_dim;
        Ok(Self {
            wz: params.add_matrix(format!("{prefix}.wz"), hidden_dim, cat, rng)?,
            bz: params.add_zero_vector(format!("{prefix}.bz"), hidden_dim)?,
            wr: params.add_matrix(format!("{prefix}.wr"), hidden_dim, cat, rng)?,
            br: params.add_zero_vector(format!("{prefix}.br"), hidden_dim)?,
            wh: params.add_matrix(format!("{prefix}.wh"), hidden_dim, cat, rng)?,
            bh: params.add_zero_vector(format!("{prefix}.bh"), hidden_dim)?,
        })
    }
}

/// One GRU step:
///
/// ```text
/// z = sigmoid(Wz [x, h] + bz)
/// r = sigmoid(Wr [x, h] + br)
/// h~ = tanh(Wh [x, r . h] + bh)
/// h' = (1 - z) . h + z . h~
/// ```
pub fn gru_cell(
    tape: &mut Tape,
    params: &ParamSet,
    gru: &GruParams,
    input: TensorId,
    hidden: TensorId,
) -> Result<TensorId, NumericsError> {
    let xh = tape.concat(&[input, hidden])?;
    let wz = tape.param(params, gru.wz)?;
    let bz = tape.param(params, gru.bz)?;
    let z_pre = tape.linear(wz, bz, xh)?;
    let z = tape.sigmoid(z_pre)?;

    let wr = tape.param(params, gru.wr)?;
    let br = tape.param(params, gru.br)?;
    let r_pre = tape.linear(wr, br, xh)?;
    let r = tape.sigmoid(r_pre)?;

    let rh = tape.mul(r, hidden)?;
    let xrh = tape.concat(&[input, rh])?;
    let wh = tape.param(params, gru.wh)?;
    let bh = tape.param(params, gru.bh)?;
    let cand_pre = tape.linear(wh, bh, xrh)?;
    let cand = tape.tanh(cand_pre)?;

    let keep = tape.affine_const(z, -1.0, 1.0)?; // 1 - z
    let kept = tape.mul(keep, hidden)?;
    let new = tape.mul(z, cand)?;
    tape.add(kept, new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;
    use rand::SeedableRng;

    fn zeroed_gru(input_dim: usize, hidden_dim: usize) -> (ParamSet, GruParams) {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let gru = GruParams::register(&mut params, "g", input_dim, hidden_dim, &mut rng).unwrap();
        for (_, p) in params.iter().map(|(i, p)| (i, p.name.clone())).collect::<Vec<_>>() {
            let id = params.id_of(&p).unwrap();
            let t = params.get_mut(id);
            t.value.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
        }
        (params, gru)
    }

    #[test]
    fn zero_weights_halve_hidden() {
        // z = 0.5, cand = 0 -> h' = 0.5 h
        let (params, gru) = zeroed_gru(2, 3);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![0.3, -0.7])).unwrap();
        let h = tape.constant(Tensor::vector(vec![1.0, -2.0, 4.0])).unwrap();
        let out = gru_cell(&mut tape, &params, &gru, x, h).unwrap();
        let got = tape.value(out).as_slice();
        assert!(got.iter().zip([0.5, -1.0, 2.0]).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn zero_hidden_zero_weights_gives_zero() {
        let (params, gru) = zeroed_gru(2, 3);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![0.3, -0.7])).unwrap();
        let h = tape.constant(Tensor::vector(vec![0.0; 3])).unwrap();
        let out = gru_cell(&mut tape, &params, &gru, x, h).unwrap();
        assert!(tape.value(out).as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn matches_scalar_oracle() {
        // Straight-line scalar recomputation of the same recurrence.
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, h) = (3, 4);
        let gru = GruParams::register(&mut params, "g", n, h, &mut rng).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64) * 0.37 - 0.4).collect();
        let hid: Vec<f64> = (0..h).map(|i| (i as f64) * -0.21 + 0.3).collect();

        let mut tape = Tape::new();
        let xi = tape.constant(Tensor::vector(x.clone())).unwrap();
        let hi = tape.constant(Tensor::vector(hid.clone())).unwrap();
        let out = gru_cell(&mut tape, &params, &gru, xi, hi).unwrap();
        let got = tape.value(out).as_slice().to_vec();

        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let cat: Vec<f64> = x.iter().chain(hid.iter()).copied().collect();
        let row_dot = |pid: crate::numerics::ParamId, r: usize, v: &[f64]| -> f64 {
            let m = &params.get(pid).value;
            m.as_slice()[r * m.cols()..(r + 1) * m.cols()]
                .iter()
                .zip(v)
                .map(|(a, b)| a * b)
                .sum()
        };
        for r in 0..h {
            let z = sig(row_dot(gru.wz, r, &cat) + params.get(gru.bz).value.as_slice()[r]);
            let rr = sig(row_dot(gru.wr, r, &cat) + params.get(gru.br).value.as_slice()[r]);
            // candidate uses [x, r.h]; the r-gate varies per row, so build the full gated vector
            let mut gate = vec![0.0; h];
            for k in 0..h {
                gate[k] = sig(row_dot(gru.wr, k, &cat) + params.get(gru.br).value.as_slice()[k]) * hid[k];
            }
            let _ = rr;
            let cat2: Vec<f64> = x.iter().copied().chain(gate.iter().copied()).collect();
            let cand = (row_dot(gru.wh, r, &cat2) + params.get(gru.bh).value.as_slice()[r]).tanh();
            let want = (1.0 - z) * hid[r] + z * cand;
            assert!((got[r] - want).abs() < 1e-12, "row {r}: {} vs {}", got[r], want);
        }
    }
}
