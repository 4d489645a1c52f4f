//! Local training, evaluation and data preparation.

mod data;
mod model;
mod partition;
mod synthetic;

pub use data::{load_table, Shard, Targets};
pub use model::{ModelKind, ModelSpec};
pub use partition::{dirichlet_partition, iid_partition};
pub use synthetic::{least_squares, make_synthetic_task, SyntheticTask, TaskSpec};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::params::ParamVector;

/// SGD-with-momentum settings for one local training call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.5,
            batch_size: 50,
            epochs: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be >= 0, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        Ok(())
    }
}

/// Runs `epochs × ⌈n / batch⌉` momentum-SGD steps on `shard`, starting
/// from `params` with zero velocity:
///
/// ```text
/// v ← μ·v + g
/// p ← p − lr·v
/// ```
///
/// Batch order is reshuffled from `rng` every epoch.
pub fn local_train<R: Rng + ?Sized>(
    model: &ModelSpec,
    params: &ParamVector,
    shard: &Shard,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<ParamVector> {
    model.check(params, shard)?;
    if shard.is_empty() {
        return Err(Error::Data("cannot train on an empty shard".into()));
    }
    let mut p = params.clone().into_inner();
    let mut velocity = vec![0.0; p.len()];
    let mut grad = vec![0.0; p.len()];
    let mut order: Vec<usize> = (0..shard.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let loss = model.loss_grad(&p, shard, batch, Some(&mut grad));
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged(format!(
                    "loss {loss} at epoch {epoch}, step {step} (lr {}, batch {})",
                    cfg.learning_rate,
                    batch.len()
                )));
            }
            for ((pi, vi), gi) in p.iter_mut().zip(&mut velocity).zip(&grad) {
                *vi = cfg.momentum * *vi + gi;
                *pi -= cfg.learning_rate * *vi;
            }
        }
    }
    let out = ParamVector::new(p);
    if !out.is_finite() {
        return Err(Error::Diverged("parameters became non-finite".into()));
    }
    Ok(out)
}

/// Mean loss over a shard.
pub fn mean_loss(model: &ModelSpec, params: &ParamVector, shard: &Shard) -> Result<f64> {
    model.check(params, shard)?;
    if shard.is_empty() {
        return Err(Error::Data("empty shard".into()));
    }
    let idx: Vec<usize> = (0..shard.len()).collect();
    Ok(model.loss_grad(params.as_slice(), shard, &idx, None))
}

/// Loss and accuracy of a model on a held-out shard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// Top-1 accuracy for classifiers; R² clamped to `[0, 1]` for regression.
    pub accuracy: f64,
}

pub fn evaluate(model: &ModelSpec, params: &ParamVector, test: &Shard) -> Result<Evaluation> {
    let loss = mean_loss(model, params, test)?;
    let accuracy = match test.targets() {
        Targets::Class { labels, .. } => {
            let hits = labels
                .iter()
                .enumerate()
                .filter(|&(i, &l)| model.predict(params.as_slice(), test.row(i)) as usize == l)
                .count();
            hits as f64 / labels.len() as f64
        }
        Targets::Real(y) => {
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let total: f64 = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64;
            if total > 0.0 {
                (1.0 - loss / total).clamp(0.0, 1.0)
            } else if loss == 0.0 {
                1.0
            } else {
                0.0
            }
        }
    };
    Ok(Evaluation { loss, accuracy })
}
