//! IDX file reader/writer (big-endian magic + dims, as used by the classic
//! digit datasets). Supports unsigned-byte and float32 element types.

use std::fs;
use std::path::Path;

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};

const TYPE_U8: u8 = 0x08;
const TYPE_F32: u8 = 0x0D;

#[derive(Debug)]
struct IdxFile {
    type_code: u8,
    dims: Vec<usize>,
    /// Raw element bytes, big-endian for f32.
    payload: Vec<u8>,
}

fn parse_idx(bytes: &[u8], path: &str) -> Result<IdxFile> {
    let err = |offset: usize, message: String| Error::Parse {
        path: path.to_string(),
        offset: offset as u64,
        message,
    };
    if bytes.len() < 4 {
        return Err(err(0, "file shorter than 4-byte magic".into()));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(err(0, "magic must start with two zero bytes".into()));
    }
    let type_code = bytes[2];
    let elem_size = match type_code {
        TYPE_U8 => 1,
        TYPE_F32 => 4,
        other => return Err(err(2, format!("unsupported element type 0x{other:02x}"))),
    };
    let ndims = bytes[3] as usize;
    let header_len = 4 + 4 * ndims;
    if bytes.len() < header_len {
        return Err(err(4, format!("truncated: {ndims} dims need {header_len} header bytes")));
    }
    let mut dims = Vec::with_capacity(ndims);
    for d in 0..ndims {
        let at = 4 + 4 * d;
        let v = u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
        dims.push(v as usize);
    }
    let count: usize = dims.iter().product();
    let expected = header_len + count * elem_size;
    if bytes.len() != expected {
        return Err(err(
            header_len,
            format!("payload has {} bytes, dims imply {}", bytes.len() - header_len, count * elem_size),
        ));
    }
    Ok(IdxFile {
        type_code,
        dims,
        payload: bytes[header_len..].to_vec(),
    })
}

fn idx_values(file: &IdxFile) -> Vec<f32> {
    match file.type_code {
        TYPE_U8 => file.payload.iter().map(|&b| f32::from(b)).collect(),
        TYPE_F32 => file
            .payload
            .chunks_exact(4)
            .map(|c| f32::from_be_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        _ => unreachable!("parse_idx validated the type code"),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Load a (features, labels) IDX pair as a dataset. Features are min-max
/// normalized to [0, 1] over the whole file.
pub fn load_idx(
    features_path: &Path,
    labels_path: &Path,
    num_classes: usize,
) -> Result<Dataset> {
    let feat_file = parse_idx(&read_file(features_path)?, &features_path.display().to_string())?;
    let label_file = parse_idx(&read_file(labels_path)?, &labels_path.display().to_string())?;
    if feat_file.dims.len() < 2 {
        return Err(Error::Validation(format!(
            "feature file {} must have at least 2 dims",
            features_path.display()
        )));
    }
    if label_file.dims.len() != 1 || label_file.type_code != TYPE_U8 {
        return Err(Error::Validation(format!(
            "label file {} must be a 1-d unsigned-byte vector",
            labels_path.display()
        )));
    }
    let n = feat_file.dims[0];
    if label_file.dims[0] != n {
        return Err(Error::Validation(format!(
            "feature file has {n} rows but label file has {}",
            label_file.dims[0]
        )));
    }
    let feature_len: usize = feat_file.dims[1..].iter().product();
    let mut features = idx_values(&feat_file);
    normalize_min_max(&mut features);
    let labels: Vec<u32> = label_file.payload.iter().map(|&b| u32::from(b)).collect();
    let name = features_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    Dataset::new(name, features, labels, feature_len, num_classes)
}

fn normalize_min_max(values: &mut [f32]) {
    let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
    for &v in values.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    if span > 0.0 {
        for v in values.iter_mut() {
            *v = (*v - lo) / span;
        }
    } else {
        for v in values.iter_mut() {
            *v = 0.0;
        }
    }
}

/// Write a float32 IDX tensor file (big-endian payload).
pub fn write_idx_f32(path: &Path, dims: &[usize], values: &[f32]) -> Result<()> {
    let count: usize = dims.iter().product();
    if count != values.len() {
        return Err(Error::Dimension(format!(
            "dims imply {count} values, got {}",
            values.len()
        )));
    }
    let mut bytes = vec![0u8, 0, TYPE_F32, dims.len() as u8];
    for &d in dims {
        bytes.extend_from_slice(&(d as u32).to_be_bytes());
    }
    for &v in values {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Write an unsigned-byte IDX vector file (labels).
pub fn write_idx_u8(path: &Path, values: &[u8]) -> Result<()> {
    let mut bytes = vec![0u8, 0, TYPE_U8, 1];
    bytes.extend_from_slice(&(values.len() as u32).to_be_bytes());
    bytes.extend_from_slice(values);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
