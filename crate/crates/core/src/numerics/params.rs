//! Named trainable parameters with persistent gradient buffers.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;
use super::NumericsError;

/// Stable handle to one parameter inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub(crate) fn from_index(idx: usize) -> Self {
        Self(idx)
    }
}

/// One named parameter: a value tensor and a same-shape gradient buffer.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Vec<f64>,
}

/// The full set of a model's parameters, addressable by stable names.
///
/// Iteration order is insertion order, which keeps optimizer updates and
/// norm computations deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    entries: Vec<Parameter>,
    by_name: HashMap<String, ParamId>,
    /// Set once gradients have been accumulated since the last optimizer step.
    pub(crate) has_grads: bool,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter under a unique name.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId, NumericsError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(NumericsError::DuplicateParam { name });
        }
        let id = ParamId(self.entries.len());
        let grad = vec![0.0; value.len()];
        self.by_name.insert(name.clone(), id);
        self.entries.push(Parameter { name, value, grad });
        Ok(id)
    }

    /// Matrix parameter initialized uniformly in `(-1/sqrt(cols), 1/sqrt(cols))`.
    pub fn add_matrix(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<ParamId, NumericsError> {
        let bound = 1.0 / (cols.max(1) as f64).sqrt();
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
        self.add(name, Tensor::matrix(rows, cols, data)?)
    }

    /// Vector parameter initialized to zeros (the convention for biases).
    pub fn add_zero_vector(&mut self, name: impl Into<String>, len: usize) -> Result<ParamId, NumericsError> {
        self.add(name, Tensor::vector(vec![0.0; len]))
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.entries[id.0]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.entries.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Total number of scalar coefficients across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|p| p.value.len()).sum()
    }

    /// Adds `grads` into the persistent per-parameter gradient buffers.
    pub fn accumulate(&mut self, grads: &Grads) {
        for (id, g) in grads.iter() {
            let slot = &mut self.entries[id.0].grad;
            for (dst, src) in slot.iter_mut().zip(g) {
                *dst += src;
            }
        }
        self.has_grads = true;
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.entries {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
        self.has_grads = false;
    }

    /// Global L2 norm over every gradient coefficient.
    pub fn grad_norm(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|p| p.grad.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Scales all gradients so the global norm is at most `max_norm`.
    pub fn clip_grad_norm(&mut self, max_norm: f64) {
        let norm = self.grad_norm();
        if norm > max_norm && norm > 0.0 {
            let scale = max_norm / norm;
            for p in &mut self.entries {
                p.grad.iter_mut().for_each(|g| *g *= scale);
            }
        }
    }
}

/// Gradients produced by one backward pass, keyed by parameter.
#[derive(Debug, Default)]
pub struct Grads {
    by_param: HashMap<ParamId, Vec<f64>>,
}

impl Grads {
    pub(crate) fn add(&mut self, id: ParamId, grad: &[f64]) {
        match self.by_param.get_mut(&id) {
            Some(slot) => {
                for (dst, src) in slot.iter_mut().zip(grad) {
                    *dst += src;
                }
            }
            None => {
                self.by_param.insert(id, grad.to_vec());
            }
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.by_param.get(&id).map(|v| v.as_slice())
    }

    pub fn is_empty(&self) -> bool {
        self.by_param.is_empty()
    }

    fn iter(&self) -> impl Iterator<Item = (ParamId, &Vec<f64>)> {
        self.by_param.iter().map(|(id, g)| (*id, g))
    }
}
