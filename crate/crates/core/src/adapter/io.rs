//! Adapter weights file.
//!
//! Layout, all little-endian: `ADPT`, `u32` version (1), `u32` dim, `u32` hidden,
//! `f32` alpha, `f32` beta, `f32` temperature, then W1, b1, W2, b2, W3, b3 of the
//! visual adapter as row-major `f32`, then the same six tensors of the textual one.

use std::io::{Read, Write};
use std::path::Path;

use super::{AdapterPair, AdapterWeights};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"ADPT";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 3 + 4 * 3;

pub fn write_weights(pair: &AdapterPair, mut w: impl Write) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * pair.parameter_count());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(pair.visual.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(pair.visual.hidden as u32).to_le_bytes());
    for x in [pair.alpha, pair.beta, pair.temperature] {
        buf.extend_from_slice(&(x as f32).to_le_bytes());
    }
    for adapter in [&pair.visual, &pair.textual] {
        for t in adapter.tensors() {
            for x in t {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    w.write_all(&buf).map_err(|e| Error::io("<weights>", e))
}

pub fn read_weights(mut r: impl Read) -> Result<AdapterPair> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io("<weights>", e))?;
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("not an adapter weights file (bad magic)".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported weights version {version}")));
    }
    let dim = u32_at(8) as usize;
    let hidden = u32_at(12) as usize;
    let (alpha, beta, temperature) = (f32_at(16), f32_at(20), f32_at(24));
    let per_adapter = (dim * hidden + hidden) + (hidden * hidden + hidden) + (hidden * dim + dim);
    let expected = HEADER_LEN + 2 * 4 * per_adapter;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "weights file for dim {dim}, hidden {hidden} must be {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let mut pos = HEADER_LEN;
    let mut read_adapter = || {
        let mut a = AdapterWeights::zeros(dim, hidden);
        for t in a.tensors_mut() {
            for x in t.iter_mut() {
                *x = f32_at(pos);
                pos += 4;
            }
        }
        a
    };
    let visual = read_adapter();
    let textual = read_adapter();
    let pair = AdapterPair {
        visual,
        textual,
        alpha: f64::from(alpha),
        beta: f64::from(beta),
        temperature: f64::from(temperature),
    };
    pair.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(pair)
}

pub fn save_weights(pair: &AdapterPair, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    write_weights(pair, &mut bytes)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<AdapterPair> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Format(format!("{}: no such weights file", path.display())),
        _ => Error::io(path, e),
    })?;
    read_weights(std::io::BufReader::new(f))
}

/// Loads and checks the token dimension against the current configuration.
pub fn load_weights_expecting(path: impl AsRef<Path>, dim: usize) -> Result<AdapterPair> {
    let pair = load_weights(path)?;
    if pair.dim() != dim {
        return Err(Error::Format(format!(
            "weights have dim {}, configuration expects dim {dim}",
            pair.dim()
        )));
    }
    Ok(pair)
}
