//! Central finite-difference gradient verification.
//!
//! This path never touches the tape's backward pass: it re-runs the
//! forward closure at perturbed parameter values, so it is an independent
//! oracle for whatever the tape computes.

use super::params::{ParamId, ParamSet};
use super::tape::{Tape, TensorId};
use super::NumericsError;

/// Worst relative gradient error found by [`check_grads`].
#[derive(Debug, Clone)]
pub struct GradReport {
    pub max_rel_err: f64,
    pub worst_param: Option<(String, usize)>,
    pub checked: usize,
}

/// Compares tape gradients of `f` against central finite differences for
/// every coefficient of every parameter.
///
/// `f` must rebuild the loss from scratch on the given tape; the relative
/// error uses `|analytic - numeric| / max(1, |analytic|)`.
///
/// Losses built from ReLU gates are only piecewise smooth: a difference
/// window that straddles a kink produces a bogus estimate even when the
/// gradient is right. A coordinate whose error exceeds 1e-6 is therefore
/// re-measured at `step / 4` and `step / 16` and keeps its best estimate;
/// a genuinely wrong gradient stays wrong at every step size, while a
/// kink straddle heals as soon as the window clears it.
pub fn check_grads<F>(
    params: &mut ParamSet,
    step: f64,
    mut f: F,
) -> Result<GradReport, NumericsError>
where
    F: FnMut(&mut Tape, &ParamSet) -> Result<TensorId, NumericsError>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, params)?;
    let grads = tape.backward(loss)?;

    let ids: Vec<ParamId> = params.iter().map(|(id, _)| id).collect();
    let mut report = GradReport { max_rel_err: 0.0, worst_param: None, checked: 0 };

    for id in ids {
        let n = params.get(id).value.len();
        for k in 0..n {
            let analytic = grads.get(id).map(|g| g[k]).unwrap_or(0.0);
            let mut rel = f64::INFINITY;
            for h in [step, step / 4.0, step / 16.0] {
                let numeric = central_difference(params, id, k, h, &mut f)?;
                rel = rel.min((analytic - numeric).abs() / analytic.abs().max(1.0));
                if rel <= 1e-6 {
                    break;
                }
            }
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = Some((params.get(id).name.clone(), k));
            }
        }
    }
    Ok(report)
}

fn central_difference<F>(
    params: &mut ParamSet,
    id: ParamId,
    k: usize,
    step: f64,
    f: &mut F,
) -> Result<f64, NumericsError>
where
    F: FnMut(&mut Tape, &ParamSet) -> Result<TensorId, NumericsError>,
{
    let orig = params.get(id).value.as_slice()[k];

    params.get_mut(id).value.as_mut_slice()[k] = orig + step;
    let mut tp = Tape::new();
    let lp = f(&mut tp, params)?;
    let up = tp.scalar_value(lp);

    params.get_mut(id).value.as_mut_slice()[k] = orig - step;
    let mut tm = Tape::new();
    let lm = f(&mut tm, params)?;
    let down = tm.scalar_value(lm);

    params.get_mut(id).value.as_mut_slice()[k] = orig;
    Ok((up - down) / (2.0 * step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    #[test]
    fn linear_sum_gradient_is_outer_product_of_ones_and_x() {
        // loss = sum(W x): dW = outer(1, x)
        let mut params = ParamSet::new();
        let w = params
            .add("w", Tensor::matrix(2, 3, vec![0.5, -1.0, 2.0, 0.0, 1.5, -0.5]).unwrap())
            .unwrap();
        let x = vec![1.0, -2.0, 3.0];

        let mut tape = Tape::new();
        let wt = tape.param(&params, w).unwrap();
        let xt = tape.constant(Tensor::vector(x.clone())).unwrap();
        let y = tape.matvec(wt, xt).unwrap();
        let loss = tape.sum_elems(y).unwrap();
        let grads = tape.backward(loss).unwrap();
        let gw = grads.get(w).unwrap();
        for r in 0..2 {
            for c in 0..3 {
                assert!((gw[r * 3 + c] - x[c]).abs() < 1e-12);
            }
        }

        let xc = x.clone();
        let report = check_grads(&mut params, 1e-5, move |tape, params| {
            let wt = tape.param(params, w)?;
            let xt = tape.constant(Tensor::vector(xc.clone()))?;
            let y = tape.matvec(wt, xt)?;
            tape.sum_elems(y)
        })
        .unwrap();
        assert!(report.max_rel_err < 1e-8, "{report:?}");
    }

    #[test]
    fn constant_loss_yields_no_grads() {
        let mut params = ParamSet::new();
        params.add("unused", Tensor::vector(vec![1.0])).unwrap();
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::scalar(4.0)).unwrap();
        let grads = tape.backward(c).unwrap();
        assert!(grads.is_empty());
    }

    #[test]
    fn backward_twice_is_an_error() {
        let mut params = ParamSet::new();
        let w = params.add("w", Tensor::scalar(2.0)).unwrap();
        let mut tape = Tape::new();
        let wt = tape.param(&params, w).unwrap();
        let loss = tape.sum_elems(wt).unwrap();
        tape.backward(loss).unwrap();
        assert!(matches!(tape.backward(loss), Err(NumericsError::BackwardTwice)));
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut params = ParamSet::new();
        let w = params.add("w", Tensor::vector(vec![1.0, 2.0])).unwrap();
        let mut tape = Tape::new();
        let wt = tape.param(&params, w).unwrap();
        assert!(matches!(tape.backward(wt), Err(NumericsError::NotScalar { .. })));
    }
}
