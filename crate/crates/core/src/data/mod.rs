//! Datasets: IDX loading, a seeded synthetic generator, and stratified
//! manifest subsets.

mod idx;
mod split;
mod synthetic;

pub use idx::{
    dataset_from_idx, encode_idx, load_idx_dir, normalize_pixel, parse_idx, IdxTensor, Split,
    TYPE_U8,
};
pub use split::manifest_split;
pub use synthetic::{synthetic_dataset, SyntheticConfig};

use crate::error::{Error, Result};
use crate::nn::ArchitectureDescriptor;

/// Labelled images, CHW per sample, pixels in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    name: String,
    shape: (usize, usize, usize),
    num_classes: usize,
    images: Vec<f32>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        shape: (usize, usize, usize),
        num_classes: usize,
        images: Vec<f32>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        let per = shape.0 * shape.1 * shape.2;
        if per == 0 {
            return Err(Error::Dataset(format!("image shape {shape:?} is empty")));
        }
        if images.len() != per * labels.len() {
            return Err(Error::Dataset(format!(
                "{} pixel values for {} labels of {per} pixels each",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Dataset(format!(
                "label {bad} >= {num_classes} classes"
            )));
        }
        if images.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Dataset("pixel values must lie in [0, 1]".into()));
        }
        Ok(Self {
            name: name.into(),
            shape,
            num_classes,
            images,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let n = self.image_len();
        &self.images[i * n..(i + 1) * n]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// New dataset holding the given samples, in the given order.
    pub fn select(&self, indices: &[usize], name: impl Into<String>) -> Dataset {
        let n = self.image_len();
        let mut images = Vec::with_capacity(indices.len() * n);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            name: name.into(),
            shape: self.shape,
            num_classes: self.num_classes,
            images,
            labels,
        }
    }

    pub fn check_compatible(&self, arch: &ArchitectureDescriptor) -> Result<()> {
        if self.shape != arch.input_shape() {
            return Err(Error::Shape(format!(
                "dataset images are {:?} but the architecture expects {:?}",
                self.shape,
                arch.input_shape()
            )));
        }
        if self.num_classes > arch.num_classes() {
            return Err(Error::Shape(format!(
                "dataset has {} classes but the architecture outputs {}",
                self.num_classes,
                arch.num_classes()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Dataset::new("d", (1, 1, 2), 2, vec![0.0, 1.0], vec![1]).is_ok());
        assert!(Dataset::new("d", (1, 1, 2), 2, vec![0.0], vec![1]).is_err());
        assert!(Dataset::new("d", (1, 1, 2), 2, vec![0.0, 1.0], vec![2]).is_err());
        assert!(Dataset::new("d", (1, 1, 2), 2, vec![0.0, 1.5], vec![0]).is_err());
        assert!(Dataset::new("d", (1, 1, 2), 2, vec![f32::NAN, 0.0], vec![0]).is_err());
    }
}
