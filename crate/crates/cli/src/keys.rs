//! Reading key material. Error messages name the source but never its
//! contents.

use std::fs;

use weightlock::cipher::KEY_LEN;
use weightlock::MasterKey;

use crate::args::KeyArgs;
use crate::UsageError;

pub fn load(args: &KeyArgs) -> Result<Option<MasterKey>, UsageError> {
    if let Some(text) = &args.key {
        return from_hex(text, "--key").map(Some);
    }
    if let Some(path) = &args.key_file {
        let bytes = fs::read(path)
            .map_err(|e| UsageError(format!("cannot read key file {}: {e}", path.display())))?;
        return MasterKey::from_slice(&bytes).map(Some).map_err(|_| {
            UsageError(format!(
                "key file {} must hold exactly {KEY_LEN} bytes, found {}",
                path.display(),
                bytes.len()
            ))
        });
    }
    if let Some(var) = &args.key_env {
        let text = std::env::var(var)
            .map_err(|_| UsageError(format!("environment variable {var} is not set")))?;
        return from_hex(&text, &format!("environment variable {var}")).map(Some);
    }
    Ok(None)
}

pub fn require(args: &KeyArgs) -> Result<MasterKey, UsageError> {
    load(args)?
        .ok_or_else(|| UsageError("a key is required: pass --key, --key-file or --key-env".into()))
}

fn from_hex(text: &str, source: &str) -> Result<MasterKey, UsageError> {
    let text = text.trim();
    MasterKey::from_hex(text).map_err(|_| {
        UsageError(format!(
            "{source}: expected {} hex characters, got {} characters",
            2 * KEY_LEN,
            text.chars().count()
        ))
    })
}
