//! Versioned checkpoint files for a network and its optimizer state.
//!
//! JSON via serde: floating-point values serialize through the shortest
//! round-trip representation, so save/load reproduces every tensor bit for
//! bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamState, DenseNet};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk form of a network plus optional Adam state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetCheckpoint {
    pub version: u32,
    pub net: DenseNet,
    pub adam: Option<AdamState>,
}

/// Writes a checkpoint, overwriting any existing file.
pub fn save_net(path: &Path, net: &DenseNet, adam: Option<&AdamState>) -> Result<()> {
    let ckpt = NetCheckpoint {
        version: CHECKPOINT_VERSION,
        net: net.clone(),
        adam: adam.cloned(),
    };
    let json = serde_json::to_string(&ckpt)
        .map_err(|e| Error::Config(format!("checkpoint serialization failed: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

/// Reads a checkpoint, rejecting unknown versions.
pub fn load_net(path: &Path) -> Result<NetCheckpoint> {
    let json = fs::read_to_string(path)?;
    let ckpt: NetCheckpoint = serde_json::from_str(&json)
        .map_err(|e| Error::Config(format!("checkpoint parse failed: {e}")))?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Config(format!(
            "checkpoint version {} unsupported (expected {})",
            ckpt.version, CHECKPOINT_VERSION
        )));
    }
    Ok(ckpt)
}
