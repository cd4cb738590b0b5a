use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of the largest finite logit, lowest index on ties. If no logit is
/// finite the answer is class 0.
pub fn predict_class(logits: &[f32]) -> Result<usize> {
    if logits.is_empty() {
        return Err(Error::EmptyLogits);
    }
    let mut best: Option<(usize, f32)> = None;
    for (i, &z) in logits.iter().enumerate() {
        if !z.is_finite() {
            continue;
        }
        match best {
            Some((_, b)) if z <= b => {}
            _ => best = Some((i, z)),
        }
    }
    Ok(best.map_or(0, |(i, _)| i))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub logits: Vec<f32>,
    pub class_index: usize,
    /// Set when any logit is NaN or infinite.
    pub nan_flag: bool,
}

impl Prediction {
    pub fn from_logits(logits: Vec<f32>) -> Result<Self> {
        let class_index = predict_class(&logits)?;
        let nan_flag = logits.iter().any(|z| !z.is_finite());
        Ok(Self {
            logits,
            class_index,
            nan_flag,
        })
    }
}
