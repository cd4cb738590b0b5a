//! Whole-model locking and unlocking, plus the on-disk formats.
//!
//! Scalar `w_i` is taken as its 4 little-endian IEEE-754 binary32 bytes and
//! each byte `j` is substituted as `S[b ^ k[4i + j]]`, where `k` is the
//! keystream of the master key. Tensors are laid end to end in canonical
//! order, so a tensor's keystream offset is four times the number of
//! scalars before it. Everything operates on raw bytes: NaN payloads and
//! signed zeros survive a round trip unchanged.

mod format;

use std::cell::Cell;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::marker::PhantomData;
use std::path::Path;

use zeroize::Zeroize;

pub use format::{DIGEST_LEN, FORMAT_VERSION, LOCKED_MAGIC, PLAIN_MAGIC};

use crate::cipher::{expand_keystream, lock_in_place, unlock_in_place, MasterKey};
use crate::error::{Error, Result};
use crate::nn::{check_tensors, ArchitectureDescriptor, Model, ParamSource, WeightTensor};
use format::{decode, digest_of, encode_body, Entry};

/// One tensor's locked bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LockedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub blob: Vec<u8>,
}

impl LockedTensor {
    pub fn element_count(&self) -> usize {
        self.blob.len() / 4
    }
}

/// A model whose parameters exist only in substituted form. Immutable once
/// built; its digest is computed on construction and checked on every read.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LockedModel {
    arch: ArchitectureDescriptor,
    tensors: Vec<LockedTensor>,
    format_version: u16,
    digest: [u8; DIGEST_LEN],
}

impl LockedModel {
    pub fn arch(&self) -> &ArchitectureDescriptor {
        &self.arch
    }

    pub fn tensors(&self) -> &[LockedTensor] {
        &self.tensors
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(LockedTensor::element_count).sum()
    }

    pub fn blob_len(&self) -> usize {
        self.tensors.iter().map(|t| t.blob.len()).sum()
    }

    pub fn format_version(&self) -> u16 {
        self.format_version
    }

    pub fn digest(&self) -> &[u8; DIGEST_LEN] {
        &self.digest
    }

    fn entries(&self) -> Vec<Entry<'_>> {
        self.tensors
            .iter()
            .map(|t| Entry {
                name: &t.name,
                shape: &t.shape,
                blob: &t.blob,
            })
            .collect()
    }

    /// The locked bytes reinterpreted as floats, without any key.
    pub(crate) fn raw_model(&self) -> Model {
        let params = self
            .tensors
            .iter()
            .map(|t| WeightTensor {
                name: t.name.clone(),
                shape: t.shape.clone(),
                values: bytes_to_f32(&t.blob),
            })
            .collect();
        Model::new(self.arch.clone(), params).expect("locked tensors match the architecture")
    }
}

/// Parameters reconstructed with some key, scoped to a single query.
///
/// Borrows the locked model it came from, cannot be cloned, written out or
/// shared between threads, and wipes its values when dropped.
pub struct UnlockedView<'a> {
    arch: &'a ArchitectureDescriptor,
    tensors: Vec<WeightTensor>,
    _single_query: PhantomData<Cell<()>>,
}

impl UnlockedView<'_> {
    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(WeightTensor::len).sum()
    }

    /// Count of reconstructed values that are NaN or infinite.
    pub fn non_finite_count(&self) -> usize {
        self.tensors
            .iter()
            .flat_map(|t| &t.values)
            .filter(|v| !v.is_finite())
            .count()
    }

    /// Copies the parameters into an ordinary trainable model. Used by the
    /// fine-tuning attack, where the adversary starts from whatever a guessed
    /// key produced.
    pub(crate) fn to_model(&self) -> Model {
        Model::new(self.arch.clone(), self.tensors.clone()).expect("view matches its architecture")
    }
}

impl ParamSource for UnlockedView<'_> {
    fn arch(&self) -> &ArchitectureDescriptor {
        self.arch
    }

    fn tensors(&self) -> &[WeightTensor] {
        &self.tensors
    }
}

impl Drop for UnlockedView<'_> {
    fn drop(&mut self) {
        for t in &mut self.tensors {
            t.values.zeroize();
        }
    }
}

fn bytes_to_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

fn f32_to_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn lock_model(model: &Model, key: &MasterKey) -> Result<LockedModel> {
    let arch = model.arch();
    check_tensors(arch, model.params())?;
    let ks = expand_keystream(key, 4 * model.param_count());
    let mut offset = 0;
    let mut tensors = Vec::with_capacity(model.params().len());
    for t in model.params() {
        let mut blob = f32_to_bytes(&t.values);
        lock_in_place(&mut blob, &ks.as_bytes()[offset..])?;
        offset += blob.len();
        tensors.push(LockedTensor {
            name: t.name.clone(),
            shape: t.shape.clone(),
            blob,
        });
    }
    let mut locked = LockedModel {
        arch: arch.clone(),
        tensors,
        format_version: FORMAT_VERSION,
        digest: [0; DIGEST_LEN],
    };
    let body = encode_body(LOCKED_MAGIC, &arch.to_text(), &locked.entries())?;
    locked.digest = digest_of(&body);
    Ok(locked)
}

/// Reconstructs parameters with `key`. Any key is accepted: a wrong key
/// yields wrong (often non-finite) values, not an error.
pub fn unlock_model<'a>(locked: &'a LockedModel, key: &MasterKey) -> Result<UnlockedView<'a>> {
    let ks = expand_keystream(key, locked.blob_len());
    let mut offset = 0;
    let mut tensors = Vec::with_capacity(locked.tensors.len());
    let mut scratch = Vec::new();
    for t in &locked.tensors {
        scratch.clear();
        scratch.extend_from_slice(&t.blob);
        unlock_in_place(&mut scratch, &ks.as_bytes()[offset..])?;
        offset += scratch.len();
        tensors.push(WeightTensor {
            name: t.name.clone(),
            shape: t.shape.clone(),
            values: bytes_to_f32(&scratch),
        });
    }
    scratch.zeroize();
    Ok(UnlockedView {
        arch: &locked.arch,
        tensors,
        _single_query: PhantomData,
    })
}

pub fn write_locked<W: Write>(locked: &LockedModel, mut sink: W) -> Result<()> {
    let body = encode_body(LOCKED_MAGIC, &locked.arch.to_text(), &locked.entries())?;
    sink.write_all(&body)?;
    sink.write_all(&locked.digest)?;
    sink.flush()?;
    Ok(())
}

pub fn read_locked<R: Read>(mut source: R) -> Result<LockedModel> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    locked_from_bytes(&bytes)
}

pub fn locked_to_bytes(locked: &LockedModel) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(locked.blob_len() + 1024);
    write_locked(locked, &mut out)?;
    Ok(out)
}

pub fn locked_from_bytes(bytes: &[u8]) -> Result<LockedModel> {
    let decoded = decode(bytes, LOCKED_MAGIC)?;
    let arch: ArchitectureDescriptor = decoded
        .arch_text
        .parse()
        .map_err(|e| Error::MalformedFile(format!("architecture: {e}")))?;
    let tensors: Vec<LockedTensor> = decoded
        .entries
        .into_iter()
        .map(|e| LockedTensor {
            name: e.name,
            shape: e.shape,
            blob: e.blob,
        })
        .collect();
    let shells: Vec<WeightTensor> = tensors
        .iter()
        .map(|t| WeightTensor {
            name: t.name.clone(),
            shape: t.shape.clone(),
            values: vec![0.0; t.element_count()],
        })
        .collect();
    check_tensors(&arch, &shells).map_err(|e| Error::MalformedFile(e.to_string()))?;
    Ok(LockedModel {
        arch,
        tensors,
        format_version: FORMAT_VERSION,
        digest: decoded.digest,
    })
}

/// Plaintext checkpoint. Only the offline training workflow writes these.
pub fn write_model<W: Write>(model: &Model, mut sink: W) -> Result<()> {
    let blobs: Vec<Vec<u8>> = model
        .params()
        .iter()
        .map(|t| f32_to_bytes(&t.values))
        .collect();
    let entries: Vec<Entry<'_>> = model
        .params()
        .iter()
        .zip(&blobs)
        .map(|(t, b)| Entry {
            name: &t.name,
            shape: &t.shape,
            blob: b,
        })
        .collect();
    let body = encode_body(PLAIN_MAGIC, &model.arch().to_text(), &entries)?;
    sink.write_all(&body)?;
    sink.write_all(&digest_of(&body))?;
    sink.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(mut source: R) -> Result<Model> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let decoded = decode(&bytes, PLAIN_MAGIC)?;
    let arch: ArchitectureDescriptor = decoded
        .arch_text
        .parse()
        .map_err(|e| Error::MalformedFile(format!("architecture: {e}")))?;
    let params = decoded
        .entries
        .into_iter()
        .map(|e| WeightTensor {
            name: e.name,
            shape: e.shape,
            values: bytes_to_f32(&e.blob),
        })
        .collect();
    Model::new(arch, params).map_err(|e| Error::MalformedFile(e.to_string()))
}

pub fn save_locked(locked: &LockedModel, path: &Path) -> Result<()> {
    write_locked(locked, BufWriter::new(File::create(path)?))
}

pub fn load_locked(path: &Path) -> Result<LockedModel> {
    locked_from_bytes(&std::fs::read(path)?)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    write_model(model, BufWriter::new(File::create(path)?))
}

pub fn load_model(path: &Path) -> Result<Model> {
    read_model(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{build_model, presets};

    fn tiny() -> Model {
        let arch: ArchitectureDescriptor =
            "input 1x4x4\nconv 2 3x3 stride 1 pad same relu\nmaxpool 2x2 stride 2\nflatten\ndense 3 linear"
                .parse()
                .unwrap();
        build_model(&arch, 5)
    }

    fn key(b: u8) -> MasterKey {
        MasterKey::new([b; 16])
    }

    #[test]
    fn mnist_blob_length() {
        let m = build_model(&presets::mnist(), 1);
        let lm = lock_model(&m, &key(3)).unwrap();
        assert_eq!(lm.param_count(), 86_166);
        assert_eq!(lm.blob_len(), 344_664);
    }

    #[test]
    fn zero_parameter_model() {
        let arch: ArchitectureDescriptor = "input 1x1x1\nflatten\ndense 1 linear".parse().unwrap();
        // the smallest legal model still has a weight and a bias; check the
        // empty-tensor path through the raw format instead
        let m = Model::zeros(arch);
        let lm = lock_model(&m, &key(0)).unwrap();
        assert_eq!(lm.param_count(), 2);
        let body = encode_body(LOCKED_MAGIC, "", &[]).unwrap();
        let mut file = body.clone();
        file.extend_from_slice(&digest_of(&body));
        let decoded = decode(&file, LOCKED_MAGIC).unwrap();
        assert!(decoded.entries.is_empty());
    }

    #[test]
    fn round_trip_bit_exact() {
        let m = tiny();
        let lm = lock_model(&m, &key(9)).unwrap();
        let view = unlock_model(&lm, &key(9)).unwrap();
        for (a, b) in m.params().iter().zip(view.tensors()) {
            let ab: Vec<u32> = a.values.iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u32> = b.values.iter().map(|v| v.to_bits()).collect();
            assert_eq!(ab, bb);
        }
    }

    #[test]
    fn locked_blobs_hold_no_plaintext() {
        let m = tiny();
        let lm = lock_model(&m, &key(4)).unwrap();
        let plain: Vec<u8> = m
            .params()
            .iter()
            .flat_map(|t| f32_to_bytes(&t.values))
            .collect();
        let locked: Vec<u8> = lm.tensors().iter().flat_map(|t| t.blob.clone()).collect();
        assert_ne!(plain, locked);
    }

    #[test]
    fn wrong_key_does_not_error() {
        let m = tiny();
        let lm = lock_model(&m, &key(1)).unwrap();
        let view = unlock_model(&lm, &key(2)).unwrap();
        assert_eq!(view.param_count(), m.param_count());
        assert_ne!(view.tensors()[0].values, m.params()[0].values);
    }

    #[test]
    fn deterministic_files() {
        let m = tiny();
        let a = locked_to_bytes(&lock_model(&m, &key(7)).unwrap()).unwrap();
        let b = locked_to_bytes(&lock_model(&m, &key(7)).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn plaintext_round_trip() {
        let m = tiny();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"DLM1");
        assert_eq!(read_model(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn plaintext_and_locked_magic_are_not_interchangeable() {
        let m = tiny();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        assert!(matches!(
            locked_from_bytes(&buf),
            Err(Error::BadMagic { .. })
        ));
        let locked = locked_to_bytes(&lock_model(&m, &key(1)).unwrap()).unwrap();
        assert!(matches!(
            read_model(locked.as_slice()),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn version_mismatch() {
        let m = tiny();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        buf[4] = 2;
        assert!(matches!(
            read_model(buf.as_slice()),
            Err(Error::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = locked_to_bytes(&lock_model(&tiny(), &key(1)).unwrap()).unwrap();
        bytes.push(0);
        assert!(matches!(
            locked_from_bytes(&bytes),
            Err(Error::MalformedFile(_))
        ));
    }
}
