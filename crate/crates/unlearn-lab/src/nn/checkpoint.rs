//! Checkpoint files: text header plus raw little-endian f32 payload.
//!
//! Layout:
//!
//! ```text
//! unlearn-lab checkpoint v1
//! arch: input 1 8 8 | conv2d 1 6 3 | ...
//! seed: 42
//! init: kaiming_uniform_fan_in
//! p: 7268
//! ---
//! <p little-endian f32 values in flat index order>
//! ```
//!
//! `load(save(m))` is bit-exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::arch::ArchSpec;
use crate::nn::model::{Model, INIT_SCHEME};

const MAGIC: &str = "unlearn-lab checkpoint v1";

/// Serialize a model to bytes.
pub fn to_bytes(model: &Model) -> Vec<u8> {
    let header = format!(
        "{MAGIC}\narch: {}\nseed: {}\ninit: {INIT_SCHEME}\np: {}\n---\n",
        model.arch(),
        model.init_seed(),
        model.param_count()
    );
    let mut out = header.into_bytes();
    for v in model.params() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parse a model from bytes produced by [`to_bytes`].
pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Model> {
    let parse_err = |offset: usize, message: &str| Error::Parse {
        path: origin.to_string(),
        offset: offset as u64,
        message: message.to_string(),
    };
    let sep = b"\n---\n";
    let header_end = bytes
        .windows(sep.len())
        .position(|w| w == sep)
        .ok_or_else(|| parse_err(0, "missing header separator '---'"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|e| parse_err(e.valid_up_to(), "header is not utf-8"))?;
    let payload = &bytes[header_end + sep.len()..];

    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(parse_err(0, "bad magic line"));
    }
    let mut arch = None;
    let mut seed = None;
    let mut p = None;
    let mut offset = MAGIC.len() + 1;
    for line in lines {
        let (key, value) = line
            .split_once(": ")
            .ok_or_else(|| parse_err(offset, "header line is not 'key: value'"))?;
        match key {
            "arch" => arch = Some(ArchSpec::parse(value)?),
            "seed" => {
                seed = Some(value.parse::<u64>().map_err(|_| {
                    parse_err(offset, "seed is not an unsigned integer")
                })?)
            }
            "p" => {
                p = Some(value.parse::<usize>().map_err(|_| {
                    parse_err(offset, "p is not an unsigned integer")
                })?)
            }
            "init" => {} // informational
            _ => return Err(parse_err(offset, &format!("unknown header key '{key}'"))),
        }
        offset += line.len() + 1;
    }
    let arch = arch.ok_or_else(|| parse_err(offset, "missing arch header"))?;
    let seed = seed.ok_or_else(|| parse_err(offset, "missing seed header"))?;
    let p = p.ok_or_else(|| parse_err(offset, "missing p header"))?;
    if payload.len() != p * 4 {
        return Err(parse_err(
            header_end + sep.len(),
            &format!("payload has {} bytes, expected {}", payload.len(), p * 4),
        ));
    }
    let params: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Model::from_params(arch, params, seed)
}

/// Write a checkpoint atomically (temp file + rename).
pub fn save(model: &Model, path: &Path) -> Result<()> {
    let bytes = to_bytes(model);
    let tmp = path.with_extension("ckpt.tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read a checkpoint from disk.
pub fn load(path: &Path) -> Result<Model> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, &path.display().to_string())
}
