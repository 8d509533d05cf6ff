//! Binary parameter masks and their compact file format.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Model;

/// A binary vector over all `p` parameters: true entries may be updated by
/// the unlearning algorithm, false entries are frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub bits: Vec<bool>,
    /// Parameter budget this mask was built for (achieved fraction for
    /// unbudgeted strategies).
    pub alpha: f64,
    /// Provenance, e.g. "del", "salloc", "critmem", "random_matched(del)".
    pub strategy_tag: String,
}

impl Mask {
    pub fn new(bits: Vec<bool>, alpha: f64, strategy_tag: impl Into<String>) -> Mask {
        Mask {
            bits,
            alpha,
            strategy_tag: strategy_tag.into(),
        }
    }

    pub fn all_ones(p: usize, strategy_tag: impl Into<String>) -> Mask {
        Mask::new(vec![true; p], 1.0, strategy_tag)
    }

    pub fn all_zeros(p: usize, strategy_tag: impl Into<String>) -> Mask {
        Mask::new(vec![false; p], 0.0, strategy_tag)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of selected parameters.
    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Selected count within an index range.
    pub fn popcount_in(&self, range: std::ops::Range<usize>) -> usize {
        self.bits[range].iter().filter(|&&b| b).count()
    }

    /// Union with another mask, keeping this mask's metadata.
    pub fn union(&self, other: &Mask) -> Mask {
        assert_eq!(self.len(), other.len());
        Mask {
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a || b)
                .collect(),
            alpha: self.alpha,
            strategy_tag: self.strategy_tag.clone(),
        }
    }

    /// Indices of the selected parameters.
    pub fn set_indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
            .collect()
    }

    /// True when every neuron group of the model is either fully selected or
    /// fully unselected.
    pub fn is_channel_aligned(&self, model: &Model) -> bool {
        model.neuron_groups().iter().all(|g| {
            let selected = self.popcount_in(g.range.clone());
            selected == 0 || selected == g.range.len()
        })
    }

    /// Serialize: text header plus bit-packed payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = format!(
            "unlearn-lab mask v1\np: {}\nalpha: {}\nstrategy: {}\npopcount: {}\n---\n",
            self.len(),
            self.alpha,
            self.strategy_tag,
            self.popcount()
        );
        let mut out = header.into_bytes();
        let mut byte = 0u8;
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                byte |= 1 << (i % 8);
            }
            if i % 8 == 7 {
                out.push(byte);
                byte = 0;
            }
        }
        if self.len() % 8 != 0 {
            out.push(byte);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Mask> {
        let parse_err = |offset: usize, message: String| Error::Parse {
            path: origin.to_string(),
            offset: offset as u64,
            message,
        };
        let sep = b"\n---\n";
        let header_end = bytes
            .windows(sep.len())
            .position(|w| w == sep)
            .ok_or_else(|| parse_err(0, "missing header separator".into()))?;
        let header = std::str::from_utf8(&bytes[..header_end])
            .map_err(|e| parse_err(e.valid_up_to(), "header is not utf-8".into()))?;
        let payload = &bytes[header_end + sep.len()..];
        let mut lines = header.lines();
        if lines.next() != Some("unlearn-lab mask v1") {
            return Err(parse_err(0, "bad magic line".into()));
        }
        let mut p = None;
        let mut alpha = None;
        let mut strategy = None;
        let mut popcount = None;
        for line in lines {
            let (key, value) = line
                .split_once(": ")
                .ok_or_else(|| parse_err(0, format!("bad header line '{line}'")))?;
            match key {
                "p" => p = value.parse::<usize>().ok(),
                "alpha" => alpha = value.parse::<f64>().ok(),
                "strategy" => strategy = Some(value.to_string()),
                "popcount" => popcount = value.parse::<usize>().ok(),
                _ => return Err(parse_err(0, format!("unknown header key '{key}'"))),
            }
        }
        let p = p.ok_or_else(|| parse_err(0, "missing p".into()))?;
        let alpha = alpha.ok_or_else(|| parse_err(0, "missing alpha".into()))?;
        let strategy = strategy.ok_or_else(|| parse_err(0, "missing strategy".into()))?;
        let expect_bytes = p.div_ceil(8);
        if payload.len() != expect_bytes {
            return Err(parse_err(
                header_end,
                format!("payload has {} bytes, p={p} needs {expect_bytes}", payload.len()),
            ));
        }
        let bits: Vec<bool> = (0..p).map(|i| payload[i / 8] >> (i % 8) & 1 == 1).collect();
        let mask = Mask::new(bits, alpha, strategy);
        if let Some(pc) = popcount {
            if pc != mask.popcount() {
                return Err(parse_err(
                    header_end,
                    format!("popcount header says {pc}, payload has {}", mask.popcount()),
                ));
            }
        }
        Ok(mask)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("mask.tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Mask> {
        let mut bytes = Vec::new();
        fs::File::open(path)
            .map_err(|e| Error::io(path, e))?
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        Mask::from_bytes(&bytes, &path.display().to_string())
    }

    /// Debug export: one set index per line.
    pub fn to_index_text(&self) -> String {
        let mut out = String::new();
        for i in self.set_indices() {
            out.push_str(&i.to_string());
            out.push('\n');
        }
        out
    }
}
