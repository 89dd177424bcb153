//! Multipartite message-passing network over [`MmilpGraph`]s.
//!
//! Layer 0 encodes raw features with one MLP per vertex group. Each layer
//! then updates constraint vertices from the sum, over all variable groups,
//! of message MLP outputs on incident edges, and updates every variable
//! group from the symmetric sum over its own edges. A message MLP sees
//! `[constraint embedding, variable embedding, edge weight]`. The readout is
//! an affine map plus sigmoid on the final W0 embeddings.
//!
//! Gradients are computed by hand from a tape recorded during the forward
//! pass.

pub mod checkpoint;
pub mod gradcheck;
pub mod mlp;
pub mod model;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::encoding::MmilpGraph;
use crate::error::{Error, Result};

pub use mlp::{Activation, Dense, Mlp};
pub use model::{FeatureScaler, GnnModel, GnnParams, Prediction};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use train::{train, TrainConfig, TrainHistory};

#[cfg(test)]
mod tests;

/// Clamp applied to probabilities inside the loss.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnConfig {
    pub layers: usize,
    pub embed_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub message_hidden: Vec<usize>,
    pub update_hidden: Vec<usize>,
    /// Number of variable groups the model has encoders for. Graphs may use
    /// fewer (SPI has 2, MFI has 3).
    pub var_groups: usize,
    pub random_dim: usize,
    pub activation: Activation,
    /// Use a separate constraint-to-variable message MLP instead of sharing
    /// one per group for both directions.
    pub separate_messages: bool,
    pub seed: u64,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig {
            layers: 2,
            embed_dim: 64,
            encoder_hidden: vec![64],
            message_hidden: vec![64],
            update_hidden: vec![64],
            var_groups: 3,
            random_dim: 0,
            activation: Activation::Tanh,
            separate_messages: false,
            seed: 0,
        }
    }
}

impl GnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::InvalidConfig("at least one message-passing layer is required".into()));
        }
        if self.embed_dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be positive".into()));
        }
        if self.var_groups == 0 {
            return Err(Error::InvalidConfig("at least one variable group is required".into()));
        }
        let hidden = self.encoder_hidden.iter().chain(&self.message_hidden).chain(&self.update_hidden);
        if hidden.copied().any(|h| h == 0) {
            return Err(Error::InvalidConfig("hidden layer sizes must be positive".into()));
        }
        Ok(())
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        use crate::encoding::{CONSTRAINT_BASE_FEATURES, VAR_BASE_FEATURES};
        let d = self.embed_dim;
        let mlp = |input: usize, hidden: &[usize]| {
            let mut dims = vec![input];
            dims.extend_from_slice(hidden);
            dims.push(d);
            dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum::<usize>()
        };
        let enc = self.var_groups * mlp(VAR_BASE_FEATURES + self.random_dim, &self.encoder_hidden)
            + mlp(CONSTRAINT_BASE_FEATURES + self.random_dim, &self.encoder_hidden);
        let directions = if self.separate_messages { 2 } else { 1 };
        let per_layer = directions * self.var_groups * mlp(2 * d + 1, &self.message_hidden)
            + (self.var_groups + 1) * mlp(2 * d, &self.update_hidden);
        enc + self.layers * per_layer + d + 1
    }
}

fn check_label(pred: &Prediction, label: &[bool]) -> Result<()> {
    if pred.probabilities.len() != label.len() {
        return Err(Error::DimensionMismatch { expected: pred.probabilities.len(), got: label.len() });
    }
    Ok(())
}

/// Mean binary cross-entropy with probabilities clamped to
/// `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub fn loss(pred: &Prediction, label: &[bool]) -> Result<f64> {
    check_label(pred, label)?;
    if label.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = pred
        .probabilities
        .iter()
        .zip(label)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if y { -p.ln() } else { -(1.0 - p).ln() }
        })
        .sum();
    Ok(total / label.len() as f64)
}

/// Derivative of [`loss`] with respect to each readout logit. Zero where the
/// clamp is active.
pub fn loss_logit_gradient(pred: &Prediction, label: &[bool]) -> Vec<f64> {
    let n = label.len().max(1) as f64;
    pred.probabilities
        .iter()
        .zip(label)
        .map(|(&p, &y)| {
            if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                0.0
            } else {
                (p - if y { 1.0 } else { 0.0 }) / n
            }
        })
        .collect()
}

/// Checks that a graph fits a model config without running it.
pub fn compatible(cfg: &GnnConfig, g: &MmilpGraph) -> bool {
    g.group_count() >= 1 && g.group_count() <= cfg.var_groups && g.random_dim == cfg.random_dim
}
