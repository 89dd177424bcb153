use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{AdamState, FeatureScaler, GnnModel, GnnParams};
use crate::encoding::{MmilpGraph, CONSTRAINT_BASE_FEATURES, VAR_BASE_FEATURES};
use crate::error::{Error, Result};
use crate::rng;

/// One training example: a graph and the 0/1 label of its W0 vertices.
pub type Sample = (MmilpGraph, Vec<bool>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Shuffles the sample order each epoch when set.
    pub shuffle: bool,
    /// Fits per-group feature standardization on the training graphs before
    /// the first epoch. Skipped when the model already has an optimizer state.
    pub fit_scalers: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 16,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shuffle: true,
            fit_scalers: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be finite and nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(Error::InvalidConfig("Adam coefficients out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss over the training samples, measured after the epoch.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn last_train_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_loss)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "epoch,train_loss,val_loss")?;
        for e in &self.epochs {
            let val = e.val_loss.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{}", e.epoch, e.train_loss, val)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Mean loss of `model` over `samples`.
pub fn mean_loss(model: &GnnModel, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let losses: Vec<f64> = samples
        .par_iter()
        .map(|(g, y)| super::loss(&model.forward(g)?, y))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / samples.len() as f64)
}

/// Fits standardization for each group the model knows from the training
/// graphs. Groups that never appear keep the identity.
pub fn fit_scalers(model: &mut GnnModel, graphs: &[&MmilpGraph]) {
    let groups = model.config.var_groups;
    let r = model.config.random_dim;
    for k in 0..groups {
        let blocks = graphs.iter().filter(|g| g.group_count() > k).map(|g| &g.var_features[k]);
        model.scalers[k] = FeatureScaler::fit(VAR_BASE_FEATURES + r, blocks);
    }
    model.scalers[groups] =
        FeatureScaler::fit(CONSTRAINT_BASE_FEATURES + r, graphs.iter().map(|g| &g.constraint_features));
}

fn adam_step(params: &mut GnnParams, grad: &GnnParams, state: &mut AdamState, cfg: &TrainConfig) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let g = grad.named_tensors();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((p, (_, g)), m), v) in params.tensors_mut().into_iter().zip(g).zip(ms).zip(vs) {
        ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        });
    }
}

/// Trains with Adam on mean batch gradients. Per-sample gradients within a
/// batch are computed in parallel and summed in sample order, so results do
/// not depend on thread scheduling.
pub fn train(
    mut model: GnnModel,
    samples: &[Sample],
    validation: &[Sample],
    cfg: &TrainConfig,
) -> Result<(GnnModel, TrainHistory)> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    if model.adam.is_none() {
        if cfg.fit_scalers {
            let graphs: Vec<&MmilpGraph> = samples.iter().map(|(g, _)| g).collect();
            fit_scalers(&mut model, &graphs);
        }
        model.adam = Some(AdamState { step: 0, m: model.params.zeros_like(), v: model.params.zeros_like() });
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut shuffle_rng = rng::seeded(cfg.seed);
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            rng::shuffle(&mut shuffle_rng, &mut order);
        }
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(f64, GnnParams)> = batch
                .par_iter()
                .map(|&i| model.backward(&samples[i].0, &samples[i].1))
                .collect::<Result<_>>()?;
            let mut grad = model.params.zeros_like();
            for (l, g) in &results {
                if !l.is_finite() {
                    return Err(Error::Diverged(format!("non-finite loss in epoch {epoch}")));
                }
                grad.add_scaled(g, 1.0 / batch.len() as f64);
            }
            let mut state = model.adam.take().expect("optimizer state initialized above");
            adam_step(&mut model.params, &grad, &mut state, cfg);
            model.adam = Some(state);
        }
        let train_loss = mean_loss(&model, samples)?;
        if !train_loss.is_finite() {
            return Err(Error::Diverged(format!("non-finite training loss after epoch {epoch}")));
        }
        let val_loss = if validation.is_empty() { None } else { Some(mean_loss(&model, validation)?) };
        history.epochs.push(EpochRecord { epoch, train_loss, val_loss });
    }
    Ok((model, history))
}
