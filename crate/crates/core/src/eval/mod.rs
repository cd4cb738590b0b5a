//! Experiments on locked models: accuracy with the right key, accuracy over
//! many wrong keys, per-query latency, and fine-tuning attacks.

mod attack;
mod latency;
mod report;

pub use attack::{control_arm, fine_tune_attack, AttackConfig, AttackCurve, AttackInit};
pub use latency::{benchmark_latency, LatencyReport};
pub use report::{emit_report, Report, ReportFormat};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cipher::MasterKey;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::locker::{unlock_model, LockedModel};
use crate::nn::{forward, Model, ParamSource, Prediction};

/// How parameters were made available to an evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnlockMode {
    /// Plaintext model, no key involved.
    Plaintext,
    /// One unlock for a whole evaluation pass.
    PerPass,
    /// One unlock for every single input.
    PerInput,
}

/// What to evaluate.
#[derive(Clone, Copy, Debug)]
pub enum EvalTarget<'a> {
    Plain(&'a Model),
    Locked(&'a LockedModel, &'a MasterKey),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub dataset: String,
    pub mode: UnlockMode,
    pub sample_count: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub per_class_correct: Vec<usize>,
    pub per_class_total: Vec<usize>,
    pub nan_prediction_fraction: f64,
}

pub const EVAL_SCHEMA: &str = "weightlock.eval_report.v1";
pub const SWEEP_SCHEMA: &str = "weightlock.sweep_report.v1";

fn predict_all<P: ParamSource + ?Sized>(net: &P, d: &Dataset) -> Result<Vec<Prediction>> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    d.check_compatible(net.arch())?;
    (0..d.len()).map(|i| forward(net, d.image(i))).collect()
}

/// Per-sample predictions. A locked target is unlocked once for the pass
/// and the unlocked view is dropped before returning.
pub fn predictions(target: EvalTarget<'_>, d: &Dataset) -> Result<Vec<Prediction>> {
    match target {
        EvalTarget::Plain(m) => predict_all(m, d),
        EvalTarget::Locked(lm, key) => {
            let view = unlock_model(lm, key)?;
            predict_all(&view, d)
        }
    }
}

pub fn evaluate(target: EvalTarget<'_>, d: &Dataset) -> Result<EvalReport> {
    let preds = predictions(target, d)?;
    let mode = match target {
        EvalTarget::Plain(_) => UnlockMode::Plaintext,
        EvalTarget::Locked(..) => UnlockMode::PerPass,
    };
    Ok(summarize(&preds, d, mode))
}

/// Accuracy of any parameter source, e.g. a model mid-training.
pub fn evaluate_params<P: ParamSource + ?Sized>(net: &P, d: &Dataset) -> Result<EvalReport> {
    Ok(summarize(&predict_all(net, d)?, d, UnlockMode::Plaintext))
}

fn summarize(preds: &[Prediction], d: &Dataset, mode: UnlockMode) -> EvalReport {
    let classes = d.num_classes();
    let mut per_class_correct = vec![0; classes];
    let mut per_class_total = vec![0; classes];
    let mut nan = 0;
    for (i, p) in preds.iter().enumerate() {
        let label = d.label(i);
        per_class_total[label] += 1;
        if p.class_index == label {
            per_class_correct[label] += 1;
        }
        nan += usize::from(p.nan_flag);
    }
    let correct: usize = per_class_correct.iter().sum();
    EvalReport {
        schema: EVAL_SCHEMA.into(),
        dataset: d.name().into(),
        mode,
        sample_count: preds.len(),
        correct,
        accuracy: correct as f64 / preds.len() as f64,
        per_class_correct,
        per_class_total,
        nan_prediction_fraction: nan as f64 / preds.len() as f64,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: String,
    pub dataset: String,
    pub key_seed: u64,
    pub n_keys: usize,
    pub true_key_excluded: bool,
    pub per_key_accuracy: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// `n` uniformly random keys from a ChaCha8 stream seeded with `seed`. A
/// draw equal to `exclude` is discarded and redrawn.
pub fn random_keys(n: usize, seed: u64, exclude: Option<&MasterKey>) -> Vec<MasterKey> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keys = Vec::with_capacity(n);
    while keys.len() < n {
        let mut bytes = [0u8; 16];
        rng.fill_bytes(&mut bytes);
        let key = MasterKey::new(bytes);
        if exclude != Some(&key) {
            keys.push(key);
        }
    }
    keys
}

/// Evaluates `lm` under each key in order (one unlock per key).
pub fn sweep_keys(
    lm: &LockedModel,
    d: &Dataset,
    keys: &[MasterKey],
    key_seed: u64,
    true_key_excluded: bool,
) -> Result<SweepReport> {
    if keys.is_empty() {
        return Err(Error::InvalidArgument(
            "sweep needs at least one key".into(),
        ));
    }
    let per_key_accuracy = keys
        .iter()
        .map(|k| evaluate(EvalTarget::Locked(lm, k), d).map(|r| r.accuracy))
        .collect::<Result<Vec<_>>>()?;
    let mean = per_key_accuracy.iter().sum::<f64>() / keys.len() as f64;
    let min = per_key_accuracy
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let max = per_key_accuracy
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SweepReport {
        schema: SWEEP_SCHEMA.into(),
        dataset: d.name().into(),
        key_seed,
        n_keys: keys.len(),
        true_key_excluded,
        per_key_accuracy,
        mean,
        min,
        max,
    })
}

/// Accuracy of `lm` under `n_keys` random keys drawn from `seed`.
pub fn wrong_key_sweep(
    lm: &LockedModel,
    d: &Dataset,
    n_keys: usize,
    seed: u64,
    true_key: Option<&MasterKey>,
) -> Result<SweepReport> {
    let keys = random_keys(n_keys, seed, true_key);
    sweep_keys(lm, d, &keys, seed, true_key.is_some())
}
