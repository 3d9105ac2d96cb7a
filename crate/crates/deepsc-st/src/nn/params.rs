//! Named parameter collections and the SGD update.

use std::collections::BTreeMap;

use super::tensor::Tensor;
use super::NnError;

/// Parameter name prefixes for the three trainable blocks: semantic encoder,
/// channel encoder, and channel decoder.
pub const PREFIX_SEMANTIC_ENCODER: &str = "alpha.";
pub const PREFIX_CHANNEL_ENCODER: &str = "beta.";
pub const PREFIX_CHANNEL_DECODER: &str = "thetar.";

/// A named, ordered collection of tensors.
///
/// Names carry the block partition as a prefix (`alpha.`, `beta.`,
/// `thetar.`); iteration order is lexicographic, which keeps checkpointing
/// and gradient application deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelParams {
    tensors: BTreeMap<String, Tensor>,
}

impl ModelParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.tensors.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Checks that every tensor belongs to exactly one block.
    pub fn validate_partition(&self) -> Result<(), NnError> {
        for name in self.tensors.keys() {
            let hits = [
                PREFIX_SEMANTIC_ENCODER,
                PREFIX_CHANNEL_ENCODER,
                PREFIX_CHANNEL_DECODER,
            ]
            .iter()
            .filter(|p| name.starts_with(**p))
            .count();
            if hits != 1 {
                return Err(NnError::InvalidShape(format!(
                    "parameter {name} is not in exactly one block"
                )));
            }
        }
        Ok(())
    }
}

/// Gradients keyed like [`ModelParams`].
pub type NamedGradients = BTreeMap<String, Tensor>;

/// One plain SGD update: every parameter moves by `-lr * grad`.
///
/// `grads` must be keyed exactly like `params`.
pub fn sgd_step(
    params: &mut ModelParams,
    grads: &NamedGradients,
    learning_rate: f64,
) -> Result<(), NnError> {
    if params.len() != grads.len() {
        return Err(NnError::KeyMismatch(format!(
            "{} params vs {} grads",
            params.len(),
            grads.len()
        )));
    }
    for (name, t) in params.iter_mut() {
        let g = grads
            .get(name)
            .ok_or_else(|| NnError::KeyMismatch(format!("missing gradient for {name}")))?;
        if g.shape() != t.shape() {
            return Err(NnError::ShapeMismatch {
                left: t.shape().to_vec(),
                right: g.shape().to_vec(),
            });
        }
        for (p, gv) in t.data_mut().iter_mut().zip(g.data()) {
            *p -= learning_rate * gv;
        }
    }
    Ok(())
}

/// Training hyperparameters shared by the harness.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.batch_size < 1 {
            return Err(NnError::InvalidShape("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(NnError::InvalidShape(
                "learning_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        // Reference-scale settings; the toy experiments override them.
        Self {
            batch_size: 24,
            learning_rate: 1e-4,
            epochs: 100,
            seed: 0,
        }
    }
}
