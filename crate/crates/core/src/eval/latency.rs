use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::UnlockMode;
use crate::cipher::MasterKey;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::locker::{unlock_model, LockedModel};
use crate::nn::{forward, Model};

pub const LATENCY_SCHEMA: &str = "weightlock.latency_report.v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub schema: String,
    pub param_count: usize,
    pub mode: UnlockMode,
    pub timer: String,
    pub n_trials: usize,
    pub warmup_trials: usize,
    /// Seconds per input.
    pub plain_mean: f64,
    pub locked_mean: f64,
    pub overhead_seconds: f64,
    pub overhead_ratio: f64,
    pub plain_samples: Vec<f64>,
    pub locked_samples: Vec<f64>,
}

/// Wall time to classify one input, plaintext vs. unlock-then-classify.
///
/// Trials alternate between the two paths and cycle through the dataset.
/// The first `warmup` trials of each path are discarded.
pub fn benchmark_latency(
    model: &Model,
    locked: &LockedModel,
    key: &MasterKey,
    d: &Dataset,
    n_trials: usize,
    warmup: usize,
) -> Result<LatencyReport> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be at least 1".into()));
    }
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    d.check_compatible(locked.arch())?;
    d.check_compatible(model.arch())?;

    let mut plain_samples = Vec::with_capacity(n_trials);
    let mut locked_samples = Vec::with_capacity(n_trials);
    for trial in 0..warmup + n_trials {
        let input = d.image(trial % d.len());

        let start = Instant::now();
        black_box(forward(model, black_box(input))?);
        let plain = start.elapsed().as_secs_f64();

        let start = Instant::now();
        {
            let view = unlock_model(locked, key)?;
            black_box(forward(&view, black_box(input))?);
        }
        let locked_t = start.elapsed().as_secs_f64();

        if trial >= warmup {
            plain_samples.push(plain);
            locked_samples.push(locked_t);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let plain_mean = mean(&plain_samples);
    let locked_mean = mean(&locked_samples);
    Ok(LatencyReport {
        schema: LATENCY_SCHEMA.into(),
        param_count: locked.param_count(),
        mode: UnlockMode::PerInput,
        timer: "std::time::Instant (monotonic, nanosecond granularity)".into(),
        n_trials,
        warmup_trials: warmup,
        plain_mean,
        locked_mean,
        overhead_seconds: locked_mean - plain_mean,
        overhead_ratio: if plain_mean > 0.0 {
            locked_mean / plain_mean
        } else {
            f64::INFINITY
        },
        plain_samples,
        locked_samples,
    })
}
