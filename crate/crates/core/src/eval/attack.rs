use serde::{Deserialize, Serialize};

use super::evaluate_params;
use crate::cipher::MasterKey;
use crate::data::{manifest_split, Dataset};
use crate::error::{Error, Result};
use crate::locker::{unlock_model, LockedModel};
use crate::nn::{build_model, train_with, ArchitectureDescriptor, Model, TrainConfig};

pub const ATTACK_SCHEMA: &str = "weightlock.attack_curve.v1";

/// Where the adversary's retraining starts from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackInit {
    /// Parameters decrypted with the adversary's (wrong) key guess.
    #[default]
    WrongKeyDecrypt,
    /// The locked bytes read directly as floats.
    RawLocked,
    /// A fresh seeded initialization; the control arm.
    Fresh { seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Share of the training pool the adversary holds.
    pub fraction: f64,
    pub split_seed: u64,
    pub train: TrainConfig,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            fraction: 0.10,
            split_seed: 0,
            train: TrainConfig {
                epochs: 50,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackCurve {
    pub schema: String,
    pub init: AttackInit,
    pub fraction: f64,
    pub split_seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub train_seed: u64,
    pub manifest: String,
    pub manifest_size: usize,
    pub validation: String,
    pub validation_size: usize,
    /// Validation accuracy of the starting parameters, before any update.
    pub initial_val_accuracy: f64,
    pub per_epoch_val_accuracy: Vec<f64>,
    /// `None` where the epoch's mean loss was not finite.
    pub per_epoch_train_loss: Vec<Option<f32>>,
    pub non_finite_loss_epochs: usize,
    pub final_accuracy: f64,
}

fn retrain(
    mut model: Model,
    init: AttackInit,
    pool: &Dataset,
    val: &Dataset,
    cfg: &AttackConfig,
) -> Result<AttackCurve> {
    let manifest = manifest_split(pool, cfg.fraction, cfg.split_seed)?;
    if val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let initial_val_accuracy = evaluate_params(&model, val)?.accuracy;
    let mut per_epoch_val_accuracy = Vec::with_capacity(cfg.train.epochs);
    let report = train_with(&mut model, &manifest, &cfg.train, |_, m, _| {
        per_epoch_val_accuracy.push(evaluate_params(m, val)?.accuracy);
        Ok(())
    })?;
    let per_epoch_train_loss: Vec<Option<f32>> = report
        .epochs
        .iter()
        .map(|e| e.mean_loss.is_finite().then_some(e.mean_loss))
        .collect();
    Ok(AttackCurve {
        schema: ATTACK_SCHEMA.into(),
        init,
        fraction: cfg.fraction,
        split_seed: cfg.split_seed,
        epochs: cfg.train.epochs,
        batch_size: cfg.train.batch_size,
        learning_rate: cfg.train.learning_rate,
        train_seed: cfg.train.seed,
        manifest: manifest.name().into(),
        manifest_size: manifest.len(),
        validation: val.name().into(),
        validation_size: val.len(),
        initial_val_accuracy,
        final_accuracy: per_epoch_val_accuracy
            .last()
            .copied()
            .unwrap_or(initial_val_accuracy),
        non_finite_loss_epochs: per_epoch_train_loss.iter().filter(|l| l.is_none()).count(),
        per_epoch_train_loss,
        per_epoch_val_accuracy,
    })
}

/// Fine-tunes a locked model the way an adversary without the key would:
/// take the parameters a wrong key produces (or the raw locked floats),
/// keep them verbatim, non-finite values included, and retrain on a
/// stratified `cfg.fraction` subset of `pool`.
pub fn fine_tune_attack(
    locked: &LockedModel,
    wrong_key: &MasterKey,
    init: AttackInit,
    pool: &Dataset,
    val: &Dataset,
    cfg: &AttackConfig,
) -> Result<AttackCurve> {
    let start = match init {
        AttackInit::WrongKeyDecrypt => unlock_model(locked, wrong_key)?.to_model(),
        AttackInit::RawLocked => locked.raw_model(),
        AttackInit::Fresh { seed } => build_model(locked.arch(), seed),
    };
    retrain(start, init, pool, val, cfg)
}

/// The same retraining from a fresh initialization, with the same data
/// budget. Separates "locked parameters resist retraining" from "the
/// manifest is too small to learn from".
pub fn control_arm(
    arch: &ArchitectureDescriptor,
    init_seed: u64,
    pool: &Dataset,
    val: &Dataset,
    cfg: &AttackConfig,
) -> Result<AttackCurve> {
    retrain(
        build_model(arch, init_seed),
        AttackInit::Fresh { seed: init_seed },
        pool,
        val,
        cfg,
    )
}
