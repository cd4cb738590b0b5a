//! Key-based locking of neural network parameters.
//!
//! Every trained parameter is stored substituted through the AES S-Box after
//! XOR with a keystream expanded from a 128-bit master key. A locked model
//! only behaves like the original when the same key is supplied at query
//! time; any other key reconstructs noise.
//!
//! - [`cipher`]: S-Box, keystream expansion, bytewise lock/unlock.
//! - [`locker`]: whole-model lock/unlock and the `DLK1`/`DLM1` file formats.
//! - [`nn`]: a small conv/pool/dense engine with SGD training.
//! - [`data`]: IDX parsing, synthetic datasets, manifest subsets.
//! - [`eval`]: accuracy, wrong-key sweeps, latency and fine-tuning attacks.

pub mod cipher;
pub mod data;
pub mod error;
pub mod eval;
pub mod locker;
pub mod nn;

pub use cipher::MasterKey;
pub use data::Dataset;
pub use error::{Error, Result};
pub use locker::{lock_model, unlock_model, LockedModel, UnlockedView};
pub use nn::{ArchitectureDescriptor, Model};
