//! AES-128 key expansion, chained into an arbitrarily long keystream.
//!
//! A single expansion yields 11 round keys (176 bytes). Longer streams are
//! produced by re-running the expansion on the last 16 bytes of the previous
//! block, so block `j + 1` is `expand(block_j[160..176])`. This chaining rule
//! is part of the locked file format: changing it breaks every existing file.

use std::fmt;

use zeroize::Zeroize;

use super::sbox::SBOX;
use crate::error::{Error, Result};

pub const KEY_LEN: usize = 16;
pub const SCHEDULE_LEN: usize = 176;

const RCON: [u8; 10] = [0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1b, 0x36];

/// 128-bit master key. `Debug` never prints the key material.
#[derive(Clone, PartialEq, Eq)]
pub struct MasterKey([u8; KEY_LEN]);

impl MasterKey {
    pub const fn new(bytes: [u8; KEY_LEN]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; KEY_LEN] = bytes.try_into().map_err(|_| {
            Error::InvalidKey(format!("expected {KEY_LEN} bytes, got {}", bytes.len()))
        })?;
        Ok(Self(arr))
    }

    /// Parses exactly 32 hex digits.
    pub fn from_hex(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.len() != 2 * KEY_LEN {
            return Err(Error::InvalidKey(format!(
                "expected {} hex characters, got {}",
                2 * KEY_LEN,
                text.len()
            )));
        }
        let mut out = [0u8; KEY_LEN];
        for (i, chunk) in text.as_bytes().chunks(2).enumerate() {
            let pair = std::str::from_utf8(chunk)
                .ok()
                .and_then(|s| u8::from_str_radix(s, 16).ok())
                .ok_or_else(|| Error::InvalidKey("key contains non-hex characters".into()))?;
            out[i] = pair;
        }
        Ok(Self(out))
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for MasterKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MasterKey(..)")
    }
}

impl Drop for MasterKey {
    fn drop(&mut self) {
        self.0.zeroize();
    }
}

/// Deterministic key bytes `k_0 .. k_{n-1}` derived from a [`MasterKey`].
#[derive(Clone, PartialEq, Eq)]
pub struct Keystream {
    bytes: Vec<u8>,
}

impl Keystream {
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

impl From<Vec<u8>> for Keystream {
    fn from(bytes: Vec<u8>) -> Self {
        Self { bytes }
    }
}

impl fmt::Debug for Keystream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Keystream({} bytes)", self.bytes.len())
    }
}

impl Drop for Keystream {
    fn drop(&mut self) {
        self.bytes.zeroize();
    }
}

/// Standard AES-128 key expansion: 44 words, written out as 176 bytes.
pub fn aes128_expand(key: &[u8; KEY_LEN]) -> [u8; SCHEDULE_LEN] {
    let mut out = [0u8; SCHEDULE_LEN];
    out[..KEY_LEN].copy_from_slice(key);
    for word in 4..44 {
        let prev = 4 * (word - 1);
        let mut temp = [out[prev], out[prev + 1], out[prev + 2], out[prev + 3]];
        if word % 4 == 0 {
            temp.rotate_left(1);
            for b in &mut temp {
                *b = SBOX[*b as usize];
            }
            temp[0] ^= RCON[word / 4 - 1];
        }
        let back = 4 * (word - 4);
        for j in 0..4 {
            out[4 * word + j] = out[back + j] ^ temp[j];
        }
    }
    out
}

/// Produces `n_bytes` of keystream for `key` using the chaining rule above.
pub fn expand_keystream(key: &MasterKey, n_bytes: usize) -> Keystream {
    let mut bytes = Vec::with_capacity(n_bytes);
    let mut seed = *key.as_bytes();
    while bytes.len() < n_bytes {
        let mut block = aes128_expand(&seed);
        let take = (n_bytes - bytes.len()).min(SCHEDULE_LEN);
        bytes.extend_from_slice(&block[..take]);
        seed.copy_from_slice(&block[SCHEDULE_LEN - KEY_LEN..]);
        block.zeroize();
    }
    seed.zeroize();
    Keystream { bytes }
}
