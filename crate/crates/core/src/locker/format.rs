//! Shared container for locked (`DLK1`) and plaintext (`DLM1`) models.
//!
//! All integers little-endian:
//!
//! ```text
//! magic        [u8; 4]
//! version      u16                      (= 1)
//! arch_len     u32, arch text           (UTF-8)
//! n_tensors    u32
//! per tensor:  name_len u32, name (UTF-8)
//!              rank u32, dims u32 × rank
//!              blob_offset u64          (relative to the start of the blob section)
//!              blob_len u64             (= 4 × element count)
//! blobs        concatenated, canonical order
//! digest       [u8; 32]                 SHA-256 of every preceding byte
//! ```

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const LOCKED_MAGIC: [u8; 4] = *b"DLK1";
pub const PLAIN_MAGIC: [u8; 4] = *b"DLM1";
pub const FORMAT_VERSION: u16 = 1;
pub const DIGEST_LEN: usize = 32;
const MAX_RANK: usize = 8;

pub(crate) struct Entry<'a> {
    pub name: &'a str,
    pub shape: &'a [usize],
    pub blob: &'a [u8],
}

pub(crate) struct DecodedEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub blob: Vec<u8>,
}

pub(crate) struct Decoded {
    pub arch_text: String,
    pub entries: Vec<DecodedEntry>,
    pub digest: [u8; DIGEST_LEN],
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v)
        .map_err(|_| Error::MalformedModel(format!("{v} does not fit in 32 bits")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

/// Everything except the digest footer.
pub(crate) fn encode_body(
    magic: [u8; 4],
    arch_text: &str,
    entries: &[Entry<'_>],
) -> Result<Vec<u8>> {
    let blob_total: usize = entries.iter().map(|e| e.blob.len()).sum();
    let mut out = Vec::with_capacity(64 + arch_text.len() + 64 * entries.len() + blob_total);
    out.extend_from_slice(&magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_u32(&mut out, arch_text.len())?;
    out.extend_from_slice(arch_text.as_bytes());
    put_u32(&mut out, entries.len())?;
    let mut offset = 0u64;
    for e in entries {
        put_u32(&mut out, e.name.len())?;
        out.extend_from_slice(e.name.as_bytes());
        put_u32(&mut out, e.shape.len())?;
        for &d in e.shape {
            put_u32(&mut out, d)?;
        }
        out.extend_from_slice(&offset.to_le_bytes());
        out.extend_from_slice(&(e.blob.len() as u64).to_le_bytes());
        offset += e.blob.len() as u64;
    }
    for e in entries {
        out.extend_from_slice(e.blob);
    }
    Ok(out)
}

pub(crate) fn digest_of(body: &[u8]) -> [u8; DIGEST_LEN] {
    Sha256::digest(body).into()
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(Error::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn text(&mut self, what: &str) -> Result<String> {
        let len = self.u32()?;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::MalformedFile(format!("{what} is not valid UTF-8")))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

/// Parses and verifies a whole file image. No partial result is returned on
/// any error.
pub(crate) fn decode(bytes: &[u8], magic: [u8; 4]) -> Result<Decoded> {
    let mut cur = Cursor { bytes, pos: 0 };
    let found: [u8; 4] = cur.take(4)?.try_into().unwrap();
    if found != magic {
        return Err(Error::BadMagic {
            found,
            expected: magic,
        });
    }
    let version = cur.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let arch_text = cur.text("architecture")?;
    let count = cur.u32()?;
    // every table entry takes at least 24 bytes
    if count > cur.remaining() / 24 {
        return Err(Error::Truncated);
    }
    let mut table = Vec::with_capacity(count);
    let mut expected_offset = 0u64;
    for i in 0..count {
        let name = cur.text("tensor name")?;
        let rank = cur.u32()?;
        if rank > MAX_RANK {
            return Err(Error::MalformedFile(format!("tensor {i} has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32()?);
        }
        let offset = cur.u64()?;
        let len = cur.u64()?;
        if offset != expected_offset {
            return Err(Error::MalformedFile(format!(
                "tensor `{name}` blob offset {offset}, expected {expected_offset}"
            )));
        }
        let elems = shape
            .iter()
            .try_fold(4u64, |acc, &d| acc.checked_mul(d as u64))
            .ok_or_else(|| Error::MalformedFile(format!("tensor `{name}` size overflows")))?;
        if len != elems {
            return Err(Error::MalformedFile(format!(
                "tensor `{name}` blob is {len} bytes, shape {shape:?} needs {elems}"
            )));
        }
        expected_offset = expected_offset
            .checked_add(len)
            .ok_or_else(|| Error::MalformedFile("blob section size overflows".into()))?;
        table.push((name, shape, len as usize));
    }
    let blob_total = usize::try_from(expected_offset).map_err(|_| Error::Truncated)?;
    let needed = blob_total.checked_add(DIGEST_LEN).ok_or(Error::Truncated)?;
    match cur.remaining().cmp(&needed) {
        std::cmp::Ordering::Less => return Err(Error::Truncated),
        std::cmp::Ordering::Greater => {
            return Err(Error::MalformedFile(format!(
                "{} trailing bytes after digest",
                cur.remaining() - needed
            )))
        }
        std::cmp::Ordering::Equal => {}
    }
    let body_end = cur.pos + blob_total;
    let digest: [u8; DIGEST_LEN] = bytes[body_end..].try_into().unwrap();
    if digest_of(&bytes[..body_end]) != digest {
        return Err(Error::DigestMismatch);
    }
    let entries = table
        .into_iter()
        .map(|(name, shape, len)| {
            let blob = cur.take(len).expect("length checked above").to_vec();
            DecodedEntry { name, shape, blob }
        })
        .collect();
    Ok(Decoded {
        arch_text,
        entries,
        digest,
    })
}
