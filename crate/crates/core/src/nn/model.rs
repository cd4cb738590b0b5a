use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::ArchitectureDescriptor;
use crate::error::{Error, Result};

/// A named, row-major float tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

impl WeightTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(Error::MalformedModel(format!(
                "tensor `{name}` has shape {shape:?} ({expected} values) but {} values",
                values.len()
            )));
        }
        Ok(Self {
            name,
            shape,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Anything that can feed parameters to a forward pass.
pub trait ParamSource {
    fn arch(&self) -> &ArchitectureDescriptor;
    fn tensors(&self) -> &[WeightTensor];
}

/// A plaintext model: architecture plus parameters in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    arch: ArchitectureDescriptor,
    params: Vec<WeightTensor>,
}

/// Checks names, shapes and order of `tensors` against the architecture.
pub(crate) fn check_tensors(arch: &ArchitectureDescriptor, tensors: &[WeightTensor]) -> Result<()> {
    let specs = arch.param_specs();
    if specs.len() != tensors.len() {
        return Err(Error::MalformedModel(format!(
            "architecture expects {} tensors, got {}",
            specs.len(),
            tensors.len()
        )));
    }
    for (spec, t) in specs.iter().zip(tensors) {
        if spec.name != t.name || spec.shape != t.shape {
            return Err(Error::MalformedModel(format!(
                "expected tensor `{}` {:?}, got `{}` {:?}",
                spec.name, spec.shape, t.name, t.shape
            )));
        }
        if t.values.len() != spec.len() {
            return Err(Error::MalformedModel(format!(
                "tensor `{}` holds {} values, expected {}",
                t.name,
                t.values.len(),
                spec.len()
            )));
        }
    }
    Ok(())
}

impl Model {
    pub fn new(arch: ArchitectureDescriptor, params: Vec<WeightTensor>) -> Result<Self> {
        check_tensors(&arch, &params)?;
        Ok(Self { arch, params })
    }

    pub fn zeros(arch: ArchitectureDescriptor) -> Self {
        let params = arch
            .param_specs()
            .into_iter()
            .map(|s| {
                let n = s.len();
                WeightTensor {
                    name: s.name,
                    shape: s.shape,
                    values: vec![0.0; n],
                }
            })
            .collect();
        Self { arch, params }
    }

    pub fn arch(&self) -> &ArchitectureDescriptor {
        &self.arch
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(WeightTensor::len).sum()
    }

    pub fn params(&self) -> &[WeightTensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [WeightTensor] {
        &mut self.params
    }

    pub fn into_parts(self) -> (ArchitectureDescriptor, Vec<WeightTensor>) {
        (self.arch, self.params)
    }
}

impl ParamSource for Model {
    fn arch(&self) -> &ArchitectureDescriptor {
        &self.arch
    }

    fn tensors(&self) -> &[WeightTensor] {
        &self.params
    }
}

/// Fresh model with He-uniform weights, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`,
/// and zero biases. Tensors are filled in canonical order from a single
/// ChaCha8 stream seeded with `seed`.
pub fn build_model(arch: &ArchitectureDescriptor, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = arch
        .param_specs()
        .into_iter()
        .map(|spec| {
            let n = spec.len();
            let values = if spec.shape.len() == 1 {
                vec![0.0; n]
            } else {
                let bound = (6.0 / spec.fan_in as f64).sqrt() as f32;
                (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
            };
            WeightTensor {
                name: spec.name,
                shape: spec.shape,
                values,
            }
        })
        .collect();
    Model {
        arch: arch.clone(),
        params,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::arch::presets;

    #[test]
    fn preset_models_have_table_counts() {
        assert_eq!(build_model(&presets::mnist(), 0).param_count(), 86_166);
        assert_eq!(
            build_model(&presets::fashion_mnist(), 0).param_count(),
            180_438
        );
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let arch = presets::mnist();
        let a = build_model(&arch, 42);
        let b = build_model(&arch, 42);
        let c = build_model(&arch, 43);
        let bits = |m: &Model| -> Vec<u32> {
            m.params()
                .iter()
                .flat_map(|t| t.values.iter().map(|v| v.to_bits()))
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn rejects_mismatched_tensors() {
        let arch: ArchitectureDescriptor = "input 1x2x2\nflatten\ndense 2 linear".parse().unwrap();
        let good = Model::zeros(arch.clone());
        let mut params = good.params().to_vec();
        params[0].values.pop();
        assert!(Model::new(arch.clone(), params).is_err());
        let mut params = good.params().to_vec();
        params.swap(0, 1);
        assert!(Model::new(arch.clone(), params).is_err());
        assert!(Model::new(arch, vec![]).is_err());
        assert!(WeightTensor::new("w", vec![2, 2], vec![0.0; 3]).is_err());
    }
}
