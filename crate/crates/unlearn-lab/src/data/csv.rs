//! Headerless CSV reader: label in the first column, features after it.

use std::fs;
use std::path::Path;

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};

/// Load a headerless CSV file. Features are min-max normalized to [0, 1].
pub fn load_csv(path: &Path, num_classes: usize) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, &path.display().to_string(), num_classes)
}

/// Parse CSV text; split out for byte-offset error tests.
pub fn parse_csv(text: &str, origin: &str, num_classes: usize) -> Result<Dataset> {
    let mut labels: Vec<u32> = Vec::new();
    let mut features: Vec<f32> = Vec::new();
    let mut feature_len: Option<usize> = None;
    let mut offset = 0u64;
    for line in text.lines() {
        let line_offset = offset;
        offset += line.len() as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label_field = fields.next().unwrap_or("");
        let mut field_offset = line_offset;
        let label: u32 = label_field.trim().parse().map_err(|_| Error::Parse {
            path: origin.to_string(),
            offset: field_offset,
            message: format!("label '{}' is not an unsigned integer", label_field.trim()),
        })?;
        field_offset += label_field.len() as u64 + 1;
        let mut row = Vec::new();
        for field in fields {
            let v: f32 = field.trim().parse().map_err(|_| Error::Parse {
                path: origin.to_string(),
                offset: field_offset,
                message: format!("feature '{}' is not a number", field.trim()),
            })?;
            field_offset += field.len() as u64 + 1;
            row.push(v);
        }
        match feature_len {
            None => feature_len = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    offset: line_offset,
                    message: format!("row has {} features, earlier rows had {d}", row.len()),
                })
            }
            _ => {}
        }
        labels.push(label);
        features.extend(row);
    }
    let feature_len = feature_len.ok_or_else(|| Error::Empty(format!("{origin}: no data rows")))?;
    if feature_len == 0 {
        return Err(Error::Validation(format!("{origin}: rows have no feature columns")));
    }
    normalize(&mut features);
    let name = origin.rsplit('/').next().unwrap_or(origin).to_string();
    Dataset::new(name, features, labels, feature_len, num_classes)
}

fn normalize(values: &mut [f32]) {
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_simple_rows() {
        let ds = parse_csv("0,1.0,2.0\n1,3.0,4.0\n", "mem.csv", 2).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels, vec![0, 1]);
        assert_eq!(ds.feature_len, 2);
        // min-max over all feature values 1..4
        assert_eq!(ds.features, vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn label_equal_to_class_count_is_rejected() {
        let err = parse_csv("2,0.5\n", "mem.csv", 2).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn bad_number_reports_byte_offset() {
        let err = parse_csv("0,1.0\n1,oops\n", "mem.csv", 2).unwrap_err();
        match err {
            Error::Parse { offset, .. } => assert_eq!(offset, 8), // start of "oops"
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let err = parse_csv("0,1.0,2.0\n1,3.0\n", "mem.csv", 2).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }
}
