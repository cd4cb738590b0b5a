//! S-Box substitution and key-schedule keystream primitives.
//!
//! Locking one byte is `S[p ^ k]`; unlocking is `S⁻¹[c] ^ k`.

mod key_schedule;
mod sbox;

pub use key_schedule::{
    aes128_expand, expand_keystream, Keystream, MasterKey, KEY_LEN, SCHEDULE_LEN,
};
pub use sbox::{sbox_forward, sbox_inverse, SboxTable, INV_SBOX, SBOX};

use crate::error::{Error, Result};

fn check_len(data: usize, ks: &[u8]) -> Result<()> {
    if ks.len() < data {
        return Err(Error::KeystreamTooShort {
            needed: data,
            available: ks.len(),
        });
    }
    Ok(())
}

/// `out[i] = S[plain[i] ^ ks[i]]`.
pub fn lock_bytes(plain: &[u8], ks: &Keystream) -> Result<Vec<u8>> {
    let mut out = plain.to_vec();
    lock_in_place(&mut out, ks.as_bytes())?;
    Ok(out)
}

/// `out[i] = S⁻¹[locked[i]] ^ ks[i]`.
pub fn unlock_bytes(locked: &[u8], ks: &Keystream) -> Result<Vec<u8>> {
    let mut out = locked.to_vec();
    unlock_in_place(&mut out, ks.as_bytes())?;
    Ok(out)
}

/// In-place form of [`lock_bytes`] against a raw keystream slice. Only the
/// first `data.len()` keystream bytes are consumed.
pub fn lock_in_place(data: &mut [u8], ks: &[u8]) -> Result<()> {
    check_len(data.len(), ks)?;
    for (b, k) in data.iter_mut().zip(ks) {
        *b = SBOX[(*b ^ k) as usize];
    }
    Ok(())
}

pub fn unlock_in_place(data: &mut [u8], ks: &[u8]) -> Result<()> {
    check_len(data.len(), ks)?;
    for (b, k) in data.iter_mut().zip(ks) {
        *b = INV_SBOX[*b as usize] ^ k;
    }
    Ok(())
}
