use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::Model;
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            learning_rate: 0.05,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean per-sample loss; NaN once any sample loss is non-finite.
    pub mean_loss: f32,
    /// Accuracy of the pre-update predictions made while training.
    pub train_accuracy: f64,
    pub non_finite_batches: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
}

impl TrainReport {
    pub fn non_finite_batches(&self) -> usize {
        self.epochs.iter().map(|e| e.non_finite_batches).sum()
    }
}

pub fn train(model: &mut Model, data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    train_with(model, data, cfg, |_, _, _| Ok(()))
}

/// Mini-batch SGD on mean softmax cross-entropy. `on_epoch` runs after every
/// epoch with the updated model.
///
/// Single-threaded, fixed shuffle and fixed summation order: identical
/// inputs give bit-identical parameters. Non-finite losses are counted and
/// training carries on with whatever the parameters have become.
pub fn train_with<F>(
    model: &mut Model,
    data: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainReport>
where
    F: FnMut(usize, &Model, &EpochMetrics) -> Result<()>,
{
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    if !cfg.learning_rate.is_finite() {
        return Err(Error::InvalidArgument(
            "learning rate must be finite".into(),
        ));
    }
    data.check_compatible(model.arch())?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport::default();
    let mut grads: Vec<Vec<f32>> = model.params().iter().map(|t| vec![0.0; t.len()]).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        let mut non_finite_batches = 0;
        for batch in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| g.fill(0.0));
            let mut batch_loss = 0.0f32;
            for &idx in batch {
                let label = data.label(idx);
                let (loss, predicted) = super::accumulate_sample(
                    model.arch(),
                    model.params(),
                    data.image(idx),
                    label,
                    &mut grads,
                );
                batch_loss += loss;
                correct += usize::from(predicted == label);
            }
            if !batch_loss.is_finite() {
                non_finite_batches += 1;
            }
            loss_sum += f64::from(batch_loss);
            if cfg.learning_rate != 0.0 {
                let step = cfg.learning_rate / batch.len() as f32;
                for (t, g) in model.params_mut().iter_mut().zip(&grads) {
                    for (w, gv) in t.values.iter_mut().zip(g) {
                        *w -= step * gv;
                    }
                }
            }
        }
        let metrics = EpochMetrics {
            epoch,
            mean_loss: (loss_sum / data.len() as f64) as f32,
            train_accuracy: correct as f64 / data.len() as f64,
            non_finite_batches,
        };
        on_epoch(epoch, model, &metrics)?;
        report.epochs.push(metrics);
    }
    Ok(report)
}
