//! A small CNN/MLP engine: conv, max-pool, flatten and dense layers in f32,
//! with backpropagation and plain mini-batch SGD.

pub mod arch;
mod layers;
mod model;
mod predict;
mod train;

pub use arch::{presets, Activation, ArchitectureDescriptor, Layer, Padding, ParamSpec, Shape};
pub use model::{build_model, Model, ParamSource, WeightTensor};
pub use predict::{predict_class, Prediction};
pub use train::{train, train_with, EpochMetrics, TrainConfig, TrainReport};

pub(crate) use model::check_tensors;

use crate::error::{Error, Result};

fn check_input(arch: &ArchitectureDescriptor, input: &[f32]) -> Result<()> {
    if input.len() != arch.input_len() {
        let (c, h, w) = arch.input_shape();
        return Err(Error::Shape(format!(
            "input has {} values, architecture expects {c}x{h}x{w}",
            input.len()
        )));
    }
    Ok(())
}

/// Raw logits for one input.
pub fn logits<P: ParamSource + ?Sized>(net: &P, input: &[f32]) -> Result<Vec<f32>> {
    check_input(net.arch(), input)?;
    let mut trace = layers::forward_trace(net.arch(), net.tensors(), input);
    Ok(trace.acts.pop().unwrap_or_default())
}

pub fn forward<P: ParamSource + ?Sized>(net: &P, input: &[f32]) -> Result<Prediction> {
    Prediction::from_logits(logits(net, input)?)
}

/// Mean softmax cross-entropy over a batch and its gradient with respect to
/// every parameter tensor (same order and shapes as `net.tensors()`).
pub fn loss_and_gradient<P: ParamSource + ?Sized>(
    net: &P,
    inputs: &[&[f32]],
    labels: &[usize],
) -> Result<(f32, Vec<Vec<f32>>)> {
    if inputs.len() != labels.len() || inputs.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "batch has {} inputs and {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    let arch = net.arch();
    let classes = arch.num_classes();
    let mut grads: Vec<Vec<f32>> = net.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
    let mut total = 0.0f32;
    for (&x, &y) in inputs.iter().zip(labels) {
        check_input(arch, x)?;
        if y >= classes {
            return Err(Error::Dataset(format!("label {y} >= {classes} classes")));
        }
        total += accumulate_sample(arch, net.tensors(), x, y, &mut grads).0;
    }
    let scale = 1.0 / inputs.len() as f32;
    for g in grads.iter_mut().flatten() {
        *g *= scale;
    }
    Ok((total * scale, grads))
}

/// Adds one sample's gradient into `grads`; returns its loss and the class
/// the network predicted before the update.
pub(crate) fn accumulate_sample(
    arch: &ArchitectureDescriptor,
    tensors: &[WeightTensor],
    input: &[f32],
    label: usize,
    grads: &mut [Vec<f32>],
) -> (f32, usize) {
    let trace = layers::forward_trace(arch, tensors, input);
    let predicted = predict_class(trace.output()).unwrap_or(0);
    let (loss, dlogits) = layers::softmax_xent(trace.output(), label);
    layers::backward(arch, tensors, &trace, dlogits, grads);
    (loss, predicted)
}
