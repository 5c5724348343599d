//! Define-by-run computation tape with reverse-mode differentiation.
//!
//! Every forward primitive appends one node holding its output value and
//! enough information to push gradients back to its inputs. Tree-shaped
//! models build a fresh tape per forward pass; [`Tape::backward`] replays
//! the recorded ops once in reverse and returns gradients for every
//! parameter that participated.

use super::params::{Grads, ParamId, ParamSet};
use super::tensor::Tensor;
use super::NumericsError;

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    /// `W x` for a matrix `W` and vector `x`.
    MatVec { w: TensorId, x: TensorId },
    /// `W x + b`.
    Linear { w: TensorId, b: TensorId, x: TensorId },
    Add { a: TensorId, b: TensorId },
    Mul { a: TensorId, b: TensorId },
    /// `mul * x + add`; only the slope matters going backward.
    AffineConst { x: TensorId, mul: f64 },
    Sigmoid { x: TensorId },
    Tanh { x: TensorId },
    Relu { x: TensorId },
    Exp { x: TensorId },
    Concat { parts: Vec<TensorId> },
    SumElems { x: TensorId },
    Dot { a: TensorId, b: TensorId },
    /// `sum_j weights[j] * vectors[j]`.
    WeightedSum { weights: TensorId, vectors: Vec<TensorId> },
    Softmax { x: TensorId },
    /// Row `idx` of a matrix (embedding lookup).
    Row { m: TensorId, idx: usize },
    /// `-log softmax(logits)[target]`.
    CrossEntropy { logits: TensorId, target: usize },
    /// Binary cross-entropy from a scalar logit against target in {0,1}.
    BceWithLogit { logit: TensorId, target: f64 },
    /// `0.5 * sum(exp(lv) + mu^2 - 1 - lv)`.
    KlDiagGaussian { mu: TensorId, logvar: TensorId },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Ordered record of executed primitives; see the module docs.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_nodes: Vec<(ParamId, TensorId)>,
    // Per-node gradient buffers, allocated lazily during backward. They
    // live outside `Node` so backward can read op metadata while writing
    // into input gradients.
    grads: Vec<Option<Vec<f64>>>,
    spent: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: TensorId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Scalar value of a rank-0 node.
    pub fn scalar_value(&self, id: TensorId) -> f64 {
        self.nodes[id.0].value.value()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Result<TensorId, NumericsError> {
        if !value.all_finite() {
            return Err(NumericsError::NonFinite { op: op_name(&op) });
        }
        let id = TensorId(self.nodes.len());
        self.nodes.push(Node { value, op, requires_grad });
        Ok(id)
    }

    fn requires(&self, id: TensorId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Records a constant leaf; gradients never flow into it.
    pub fn constant(&mut self, value: Tensor) -> Result<TensorId, NumericsError> {
        self.push(value, Op::Leaf, false)
    }

    /// Records a non-parameter leaf that still receives gradients
    /// (readable afterwards with [`Tape::grad`]).
    pub fn input(&mut self, value: Tensor) -> Result<TensorId, NumericsError> {
        self.push(value, Op::Leaf, true)
    }

    /// Brings a parameter onto the tape, memoized so repeated use of the
    /// same parameter shares one leaf and accumulates one gradient.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Result<TensorId, NumericsError> {
        if let Some(&(_, tid)) = self.param_nodes.iter().find(|(pid, _)| *pid == id) {
            return Ok(tid);
        }
        let tid = self.push(params.get(id).value.clone(), Op::Leaf, true)?;
        self.param_nodes.push((id, tid));
        Ok(tid)
    }

    fn same_shape(&self, op: &'static str, a: TensorId, b: TensorId) -> Result<(), NumericsError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(NumericsError::ShapeMismatch { op, detail: format!("{:?} vs {:?}", sa, sb) });
        }
        Ok(())
    }

    /// `W x` (matrix-vector product).
    pub fn matvec(&mut self, w: TensorId, x: TensorId) -> Result<TensorId, NumericsError> {
        let (wt, xt) = (self.value(w), self.value(x));
        if !wt.is_matrix() || !xt.is_vector() || wt.cols() != xt.len() {
            return Err(NumericsError::ShapeMismatch {
                op: "matvec",
                detail: format!("{:?} . {:?}", wt.shape(), xt.shape()),
            });
        }
        let out = matvec_raw(wt.as_slice(), wt.rows(), wt.cols(), xt.as_slice());
        let req = self.requires(w) || self.requires(x);
        self.push(Tensor::vector(out), Op::MatVec { w, x }, req)
    }

    /// `W x + b` — the linear layer.
    pub fn linear(&mut self, w: TensorId, b: TensorId, x: TensorId) -> Result<TensorId, NumericsError> {
        let (wt, bt, xt) = (self.value(w), self.value(b), self.value(x));
        if !wt.is_matrix() || !xt.is_vector() || wt.cols() != xt.len() || bt.len() != wt.rows() {
            return Err(NumericsError::ShapeMismatch {
                op: "linear",
                detail: format!("W{:?} b{:?} x{:?}", wt.shape(), bt.shape(), xt.shape()),
            });
        }
        let mut out = matvec_raw(wt.as_slice(), wt.rows(), wt.cols(), xt.as_slice());
        for (o, bv) in out.iter_mut().zip(bt.as_slice()) {
            *o += bv;
        }
        let req = self.requires(w) || self.requires(b) || self.requires(x);
        self.push(Tensor::vector(out), Op::Linear { w, b, x }, req)
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, NumericsError> {
        self.same_shape("add", a, b)?;
        let data: Vec<f64> = self
            .value(a)
            .as_slice()
            .iter()
            .zip(self.value(b).as_slice())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(a) || self.requires(b);
        self.push(Tensor::new(shape, data)?, Op::Add { a, b }, req)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, NumericsError> {
        self.same_shape("mul", a, b)?;
        let data: Vec<f64> = self
            .value(a)
            .as_slice()
            .iter()
            .zip(self.value(b).as_slice())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(a) || self.requires(b);
        self.push(Tensor::new(shape, data)?, Op::Mul { a, b }, req)
    }

    /// `mul * x + add`, elementwise with constant coefficients.
    pub fn affine_const(&mut self, x: TensorId, mul: f64, add: f64) -> Result<TensorId, NumericsError> {
        let data: Vec<f64> = self.value(x).as_slice().iter().map(|v| mul * v + add).collect();
        let shape = self.value(x).shape().to_vec();
        let req = self.requires(x);
        self.push(Tensor::new(shape, data)?, Op::AffineConst { x, mul }, req)
    }

    pub fn sigmoid(&mut self, x: TensorId) -> Result<TensorId, NumericsError> {
        let data: Vec<f64> = self.value(x).as_slice().iter().map(|&v| sigmoid(v)).collect();
        let shape = self.value(x).shape().to_vec();
        let req = self.requires(x);
        self.push(Tensor::new(shape, data)?, Op::Sigmoid { x }, req)
    }

    pub fn tanh(&mut self, x: TensorId) -> Result<TensorId, NumericsError> {
        let data: Vec<f64> = self.value(x).as_slice().iter().map(|v| v.tanh()).collect();
        let shape = self.value(x).shape().to_vec();
        let req = self.requires(x);
        self.push(Tensor::new(shape, data)?, Op::Tanh { x }, req)
    }

    pub fn relu(&mut self, x: TensorId) -> Result<TensorId, NumericsError> {
        let data: Vec<f64> = self.value(x).as_slice().iter().map(|v| v.max(0.0)).collect();
        let shape = self.value(x).shape().to_vec();
        let req = self.requires(x);
        self.push(Tensor::new(shape, data)?, Op::Relu { x }, req)
    }

    pub fn exp(&mut self, x: TensorId) -> Result<TensorId, NumericsError> {
        let data: Vec<f64> = self.value(x).as_slice().iter().map(|v| v.exp()).collect();
        let shape = self.value(x).shape().to_vec();
        let req = self.requires(x);
        self.push(Tensor::new(shape, data)?, Op::Exp { x }, req)
    }

    /// Concatenates scalars and vectors into one vector.
    pub fn concat(&mut self, parts: &[TensorId]) -> Result<TensorId, NumericsError> {
        if parts.is_empty() {
            return Err(NumericsError::ShapeMismatch { op: "concat", detail: "no parts".into() });
        }
        let mut data = Vec::new();
        let mut req = false;
        for &p in parts {
            let t = self.value(p);
            if t.is_matrix() {
                return Err(NumericsError::ShapeMismatch { op: "concat", detail: "matrix part".into() });
            }
            data.extend_from_slice(t.as_slice());
            req |= self.requires(p);
        }
        self.push(Tensor::vector(data), Op::Concat { parts: parts.to_vec() }, req)
    }

    /// Sum of all elements, as a scalar node.
    pub fn sum_elems(&mut self, x: TensorId) -> Result<TensorId, NumericsError> {
        let s: f64 = self.value(x).as_slice().iter().sum();
        let req = self.requires(x);
        self.push(Tensor::scalar(s), Op::SumElems { x }, req)
    }

    /// Inner product of two equal-length vectors, as a scalar node.
    pub fn dot(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, NumericsError> {
        self.same_shape("dot", a, b)?;
        let s: f64 = self
            .value(a)
            .as_slice()
            .iter()
            .zip(self.value(b).as_slice())
            .map(|(x, y)| x * y)
            .sum();
        let req = self.requires(a) || self.requires(b);
        self.push(Tensor::scalar(s), Op::Dot { a, b }, req)
    }

    /// `sum_j weights[j] * vectors[j]` — the attention context mix.
    pub fn weighted_sum(&mut self, weights: TensorId, vectors: &[TensorId]) -> Result<TensorId, NumericsError> {
        let wt = self.value(weights);
        if !wt.is_vector() || wt.len() != vectors.len() || vectors.is_empty() {
            return Err(NumericsError::ShapeMismatch {
                op: "weighted_sum",
                detail: format!("{} weights vs {} vectors", wt.len(), vectors.len()),
            });
        }
        let dim = self.value(vectors[0]).len();
        let mut out = vec![0.0; dim];
        let mut req = self.requires(weights);
        for (j, &v) in vectors.iter().enumerate() {
            let vt = self.value(v);
            if vt.len() != dim || !vt.is_vector() {
                return Err(NumericsError::ShapeMismatch { op: "weighted_sum", detail: "ragged vectors".into() });
            }
            let wj = self.value(weights).as_slice()[j];
            for (o, x) in out.iter_mut().zip(vt.as_slice()) {
                *o += wj * x;
            }
            req |= self.requires(v);
        }
        self.push(
            Tensor::vector(out),
            Op::WeightedSum { weights, vectors: vectors.to_vec() },
            req,
        )
    }

    /// Numerically stable softmax over a non-empty vector.
    pub fn softmax(&mut self, x: TensorId) -> Result<TensorId, NumericsError> {
        let xt = self.value(x);
        if xt.is_empty() || xt.is_matrix() {
            return Err(NumericsError::ShapeMismatch { op: "softmax", detail: format!("{:?}", xt.shape()) });
        }
        let out = softmax_raw(xt.as_slice());
        let req = self.requires(x);
        self.push(Tensor::vector(out), Op::Softmax { x }, req)
    }

    /// Row `idx` of a matrix node (embedding lookup).
    pub fn row(&mut self, m: TensorId, idx: usize) -> Result<TensorId, NumericsError> {
        let mt = self.value(m);
        if !mt.is_matrix() {
            return Err(NumericsError::ShapeMismatch { op: "row", detail: format!("{:?}", mt.shape()) });
        }
        if idx >= mt.rows() {
            return Err(NumericsError::IndexOutOfRange { op: "row", index: idx, len: mt.rows() });
        }
        let cols = mt.cols();
        let data = mt.as_slice()[idx * cols..(idx + 1) * cols].to_vec();
        let req = self.requires(m);
        self.push(Tensor::vector(data), Op::Row { m, idx }, req)
    }

    /// `-log softmax(logits)[target]`, computed via a stable log-sum-exp.
    pub fn cross_entropy(&mut self, logits: TensorId, target: usize) -> Result<TensorId, NumericsError> {
        let lt = self.value(logits);
        if !lt.is_vector() || lt.is_empty() {
            return Err(NumericsError::ShapeMismatch { op: "cross_entropy", detail: format!("{:?}", lt.shape()) });
        }
        if target >= lt.len() {
            return Err(NumericsError::IndexOutOfRange { op: "cross_entropy", index: target, len: lt.len() });
        }
        let xs = lt.as_slice();
        let loss = log_sum_exp(xs) - xs[target];
        let req = self.requires(logits);
        self.push(Tensor::scalar(loss), Op::CrossEntropy { logits, target }, req)
    }

    /// Binary cross-entropy of a Bernoulli with success logit `logit`
    /// against a target in {0, 1}.
    pub fn bce_with_logit(&mut self, logit: TensorId, target: f64) -> Result<TensorId, NumericsError> {
        let lt = self.value(logit);
        if lt.len() != 1 {
            return Err(NumericsError::ShapeMismatch { op: "bce_with_logit", detail: format!("{:?}", lt.shape()) });
        }
        let x = lt.as_slice()[0];
        // max(x,0) - t*x + ln(1 + e^{-|x|})
        let loss = x.max(0.0) - target * x + (-x.abs()).exp().ln_1p();
        let req = self.requires(logit);
        self.push(Tensor::scalar(loss), Op::BceWithLogit { logit, target }, req)
    }

    /// KL divergence of a diagonal Gaussian `N(mu, exp(logvar))` from `N(0, I)`.
    pub fn kl_diag_gaussian(&mut self, mu: TensorId, logvar: TensorId) -> Result<TensorId, NumericsError> {
        self.same_shape("kl_diag_gaussian", mu, logvar)?;
        let kl: f64 = self
            .value(mu)
            .as_slice()
            .iter()
            .zip(self.value(logvar).as_slice())
            .map(|(&m, &lv)| lv.exp() + m * m - 1.0 - lv)
            .sum::<f64>()
            * 0.5;
        let req = self.requires(mu) || self.requires(logvar);
        self.push(Tensor::scalar(kl), Op::KlDiagGaussian { mu, logvar }, req)
    }

    /// Sum of all nodes in `ids`; convenience for message accumulation.
    pub fn add_many(&mut self, ids: &[TensorId]) -> Result<TensorId, NumericsError> {
        let mut acc = ids[0];
        for &id in &ids[1..] {
            acc = self.add(acc, id)?;
        }
        Ok(acc)
    }

    /// Gradient of a node after [`Tape::backward`]; `None` if no gradient
    /// reached it (or it did not require one).
    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_ref().map(|v| v.as_slice()))
    }

    /// Runs reverse-mode accumulation from the scalar `loss` node.
    ///
    /// Visits every recorded op exactly once in reverse order and returns
    /// the gradients keyed by parameter. The tape stays readable (values
    /// and per-node grads) but cannot run backward a second time without
    /// a fresh forward pass.
    pub fn backward(&mut self, loss: TensorId) -> Result<Grads, NumericsError> {
        if self.spent {
            return Err(NumericsError::BackwardTwice);
        }
        self.spent = true;
        if !self.value(loss).is_scalar() {
            return Err(NumericsError::NotScalar { op: "backward" });
        }

        self.grads = vec![None; self.nodes.len()];
        let mut out = Grads::default();
        if !self.nodes[loss.0].requires_grad {
            return Ok(out); // constant loss: nothing to do
        }
        self.grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(dy) = self.grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.apply_backward(i, &dy);
            self.grads[i] = Some(dy);
        }

        for &(pid, tid) in &self.param_nodes {
            if let Some(g) = self.grads[tid.0].as_ref() {
                out.add(pid, g);
            }
        }
        Ok(out)
    }

    fn bump(&mut self, id: TensorId, add: impl FnOnce(&mut [f64])) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        let len = self.nodes[id.0].value.len();
        let slot = self.grads[id.0].get_or_insert_with(|| vec![0.0; len]);
        add(slot);
    }

    fn apply_backward(&mut self, i: usize, dy: &[f64]) {
        // Values are read through raw clones of slices where aliasing with
        // the grad buffers would otherwise upset the borrow checker.
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatVec { w, x } => {
                let (w, x) = (*w, *x);
                let wt = self.nodes[w.0].value.clone();
                let xt = self.nodes[x.0].value.clone();
                let (rows, cols) = (wt.rows(), wt.cols());
                self.bump(w, |gw| {
                    for r in 0..rows {
                        for c in 0..cols {
                            gw[r * cols + c] += dy[r] * xt.as_slice()[c];
                        }
                    }
                });
                self.bump(x, |gx| {
                    for r in 0..rows {
                        let row = &wt.as_slice()[r * cols..(r + 1) * cols];
                        for (gxc, wrc) in gx.iter_mut().zip(row) {
                            *gxc += dy[r] * wrc;
                        }
                    }
                });
            }
            Op::Linear { w, b, x } => {
                let (w, b, x) = (*w, *b, *x);
                let wt = self.nodes[w.0].value.clone();
                let xt = self.nodes[x.0].value.clone();
                let (rows, cols) = (wt.rows(), wt.cols());
                self.bump(w, |gw| {
                    for r in 0..rows {
                        for c in 0..cols {
                            gw[r * cols + c] += dy[r] * xt.as_slice()[c];
                        }
                    }
                });
                self.bump(b, |gb| {
                    for (g, d) in gb.iter_mut().zip(dy) {
                        *g += d;
                    }
                });
                self.bump(x, |gx| {
                    for r in 0..rows {
                        let row = &wt.as_slice()[r * cols..(r + 1) * cols];
                        for (gxc, wrc) in gx.iter_mut().zip(row) {
                            *gxc += dy[r] * wrc;
                        }
                    }
                });
            }
            Op::Add { a, b } => {
                let (a, b) = (*a, *b);
                self.bump(a, |g| g.iter_mut().zip(dy).for_each(|(g, d)| *g += d));
                self.bump(b, |g| g.iter_mut().zip(dy).for_each(|(g, d)| *g += d));
            }
            Op::Mul { a, b } => {
                let (a, b) = (*a, *b);
                let av = self.nodes[a.0].value.clone();
                let bv = self.nodes[b.0].value.clone();
                self.bump(a, |g| {
                    for ((g, d), bv) in g.iter_mut().zip(dy).zip(bv.as_slice()) {
                        *g += d * bv;
                    }
                });
                self.bump(b, |g| {
                    for ((g, d), av) in g.iter_mut().zip(dy).zip(av.as_slice()) {
                        *g += d * av;
                    }
                });
            }
            Op::AffineConst { x, mul } => {
                let (x, mul) = (*x, *mul);
                self.bump(x, |g| g.iter_mut().zip(dy).for_each(|(g, d)| *g += mul * d));
            }
            Op::Sigmoid { x } => {
                let x = *x;
                let yv = self.nodes[i].value.clone();
                self.bump(x, |g| {
                    for ((g, d), y) in g.iter_mut().zip(dy).zip(yv.as_slice()) {
                        *g += d * y * (1.0 - y);
                    }
                });
            }
            Op::Tanh { x } => {
                let x = *x;
                let yv = self.nodes[i].value.clone();
                self.bump(x, |g| {
                    for ((g, d), y) in g.iter_mut().zip(dy).zip(yv.as_slice()) {
                        *g += d * (1.0 - y * y);
                    }
                });
            }
            Op::Relu { x } => {
                let x = *x;
                let xv = self.nodes[x.0].value.clone();
                self.bump(x, |g| {
                    for ((g, d), x) in g.iter_mut().zip(dy).zip(xv.as_slice()) {
                        if *x > 0.0 {
                            *g += d;
                        }
                    }
                });
            }
            Op::Exp { x } => {
                let x = *x;
                let yv = self.nodes[i].value.clone();
                self.bump(x, |g| {
                    for ((g, d), y) in g.iter_mut().zip(dy).zip(yv.as_slice()) {
                        *g += d * y;
                    }
                });
            }
            Op::Concat { parts } => {
                let parts = parts.clone();
                let mut off = 0;
                for p in parts {
                    let len = self.nodes[p.0].value.len();
                    let seg = dy[off..off + len].to_vec();
                    self.bump(p, |g| g.iter_mut().zip(&seg).for_each(|(g, d)| *g += d));
                    off += len;
                }
            }
            Op::SumElems { x } => {
                let x = *x;
                let d = dy[0];
                self.bump(x, |g| g.iter_mut().for_each(|g| *g += d));
            }
            Op::Dot { a, b } => {
                let (a, b) = (*a, *b);
                let av = self.nodes[a.0].value.clone();
                let bv = self.nodes[b.0].value.clone();
                let d = dy[0];
                self.bump(a, |g| g.iter_mut().zip(bv.as_slice()).for_each(|(g, v)| *g += d * v));
                self.bump(b, |g| g.iter_mut().zip(av.as_slice()).for_each(|(g, v)| *g += d * v));
            }
            Op::WeightedSum { weights, vectors } => {
                let weights = *weights;
                let vectors = vectors.clone();
                let wv = self.nodes[weights.0].value.clone();
                for (j, &v) in vectors.iter().enumerate() {
                    let vv = self.nodes[v.0].value.clone();
                    let contrib: f64 = dy.iter().zip(vv.as_slice()).map(|(d, x)| d * x).sum();
                    self.bump(weights, |g| g[j] += contrib);
                    let wj = wv.as_slice()[j];
                    self.bump(v, |g| g.iter_mut().zip(dy).for_each(|(g, d)| *g += wj * d));
                }
            }
            Op::Softmax { x } => {
                let x = *x;
                let yv = self.nodes[i].value.clone();
                let inner: f64 = dy.iter().zip(yv.as_slice()).map(|(d, y)| d * y).sum();
                self.bump(x, |g| {
                    for ((g, d), y) in g.iter_mut().zip(dy).zip(yv.as_slice()) {
                        *g += y * (d - inner);
                    }
                });
            }
            Op::Row { m, idx } => {
                let (m, idx) = (*m, *idx);
                let cols = self.nodes[m.0].value.cols();
                self.bump(m, |g| {
                    for (g, d) in g[idx * cols..(idx + 1) * cols].iter_mut().zip(dy) {
                        *g += d;
                    }
                });
            }
            Op::CrossEntropy { logits, target } => {
                let (logits, target) = (*logits, *target);
                let probs = softmax_raw(self.nodes[logits.0].value.as_slice());
                let d = dy[0];
                self.bump(logits, |g| {
                    for (k, (g, p)) in g.iter_mut().zip(&probs).enumerate() {
                        let onehot = if k == target { 1.0 } else { 0.0 };
                        *g += d * (p - onehot);
                    }
                });
            }
            Op::BceWithLogit { logit, target } => {
                let (logit, target) = (*logit, *target);
                let x = self.nodes[logit.0].value.as_slice()[0];
                let d = dy[0];
                self.bump(logit, |g| g[0] += d * (sigmoid(x) - target));
            }
            Op::KlDiagGaussian { mu, logvar } => {
                let (mu, logvar) = (*mu, *logvar);
                let muv = self.nodes[mu.0].value.clone();
                let lvv = self.nodes[logvar.0].value.clone();
                let d = dy[0];
                self.bump(mu, |g| g.iter_mut().zip(muv.as_slice()).for_each(|(g, m)| *g += d * m));
                self.bump(logvar, |g| {
                    g.iter_mut()
                        .zip(lvv.as_slice())
                        .for_each(|(g, lv)| *g += d * 0.5 * (lv.exp() - 1.0))
                });
            }
        }
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::MatVec { .. } => "matvec",
        Op::Linear { .. } => "linear",
        Op::Add { .. } => "add",
        Op::Mul { .. } => "mul",
        Op::AffineConst { .. } => "affine_const",
        Op::Sigmoid { .. } => "sigmoid",
        Op::Tanh { .. } => "tanh",
        Op::Relu { .. } => "relu",
        Op::Exp { .. } => "exp",
        Op::Concat { .. } => "concat",
        Op::SumElems { .. } => "sum_elems",
        Op::Dot { .. } => "dot",
        Op::WeightedSum { .. } => "weighted_sum",
        Op::Softmax { .. } => "softmax",
        Op::Row { .. } => "row",
        Op::CrossEntropy { .. } => "cross_entropy",
        Op::BceWithLogit { .. } => "bce_with_logit",
        Op::KlDiagGaussian { .. } => "kl_diag_gaussian",
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn matvec_raw(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rows];
    for r in 0..rows {
        out[r] = w[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum();
    }
    out
}

/// Max-subtracted softmax.
pub(crate) fn softmax_raw(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= z);
    out
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
