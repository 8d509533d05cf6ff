//! Architecture descriptions and their canonical text form.
//!
//! An [`ArchSpec`] is an input shape plus an ordered list of layers. It has a
//! canonical one-line text encoding used in config files and checkpoint
//! headers, e.g.
//!
//! ```text
//! input 1 8 8 | conv2d 1 6 3 | relu | flatten | dense 216 32 | relu | dense 32 8
//! ```

use std::fmt;

use crate::error::{Error, Result};

/// Shape of one example as it flows through the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Flat feature vector of length `d`.
    Flat(usize),
    /// Channels-first image tensor.
    Chw(usize, usize, usize),
}

impl Shape {
    pub fn numel(&self) -> usize {
        match *self {
            Shape::Flat(d) => d,
            Shape::Chw(c, h, w) => c * h * w,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Shape::Flat(d) => write!(f, "{d}"),
            Shape::Chw(c, h, w) => write!(f, "{c} {h} {w}"),
        }
    }
}

/// One layer of the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    /// Fully-connected layer; one neuron group per output unit.
    Dense {
        in_features: usize,
        out_features: usize,
        bias: bool,
    },
    /// 2-d convolution with square kernel, stride 1, no padding; one neuron
    /// group per output channel.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        bias: bool,
    },
    Relu,
    Flatten,
}

impl LayerSpec {
    /// Number of parameters this layer owns.
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Dense {
                in_features,
                out_features,
                bias,
            } => out_features * (in_features + usize::from(bias)),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                bias,
            } => out_channels * (in_channels * kernel * kernel + usize::from(bias)),
            LayerSpec::Relu | LayerSpec::Flatten => 0,
        }
    }

    /// Number of output neuron/channel groups (0 for parameterless layers).
    pub fn neuron_count(&self) -> usize {
        match *self {
            LayerSpec::Dense { out_features, .. } => out_features,
            LayerSpec::Conv2d { out_channels, .. } => out_channels,
            LayerSpec::Relu | LayerSpec::Flatten => 0,
        }
    }

    /// Parameters per neuron group (weights feeding one output unit, plus bias).
    pub fn group_size(&self) -> usize {
        match *self {
            LayerSpec::Dense {
                in_features, bias, ..
            } => in_features + usize::from(bias),
            LayerSpec::Conv2d {
                in_channels,
                kernel,
                bias,
                ..
            } => in_channels * kernel * kernel + usize::from(bias),
            LayerSpec::Relu | LayerSpec::Flatten => 0,
        }
    }

    /// Fan-in used by the initialization distribution.
    pub fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Dense { in_features, .. } => in_features,
            LayerSpec::Conv2d {
                in_channels,
                kernel,
                ..
            } => in_channels * kernel * kernel,
            LayerSpec::Relu | LayerSpec::Flatten => 0,
        }
    }

    pub fn is_parameterized(&self) -> bool {
        self.param_count() > 0
    }

    /// Output shape given the input shape, or a dimension error.
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        match *self {
            LayerSpec::Dense {
                in_features,
                out_features,
                ..
            } => match input {
                Shape::Flat(d) if d == in_features => Ok(Shape::Flat(out_features)),
                other => Err(Error::Dimension(format!(
                    "dense expects flat input of {in_features}, got {other}"
                ))),
            },
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => match input {
                Shape::Chw(c, h, w) if c == in_channels && h >= kernel && w >= kernel => {
                    Ok(Shape::Chw(out_channels, h - kernel + 1, w - kernel + 1))
                }
                other => Err(Error::Dimension(format!(
                    "conv2d expects {in_channels}-channel image of side >= {kernel}, got {other}"
                ))),
            },
            LayerSpec::Relu => Ok(input),
            LayerSpec::Flatten => Ok(Shape::Flat(input.numel())),
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Dense {
                in_features,
                out_features,
                bias,
            } => {
                write!(f, "dense {in_features} {out_features}")?;
                if !bias {
                    write!(f, " nobias")?;
                }
                Ok(())
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                bias,
            } => {
                write!(f, "conv2d {in_channels} {out_channels} {kernel}")?;
                if !bias {
                    write!(f, " nobias")?;
                }
                Ok(())
            }
            LayerSpec::Relu => write!(f, "relu"),
            LayerSpec::Flatten => write!(f, "flatten"),
        }
    }
}

/// Complete network description: input shape plus layer stack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchSpec {
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

impl ArchSpec {
    /// Validate shape propagation end to end and require a dense output layer.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("architecture has no layers".into()));
        }
        let mut shape = self.input;
        for (i, layer) in self.layers.iter().enumerate() {
            shape = layer.output_shape(shape).map_err(|e| {
                Error::Dimension(format!("layer {i} ({layer}): {e}"))
            })?;
        }
        match self.layers.last() {
            Some(LayerSpec::Dense { .. }) => Ok(()),
            _ => Err(Error::Config(
                "final layer must be dense (classifier logits)".into(),
            )),
        }
    }

    /// Total number of parameters `p`.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    /// Number of output classes (width of the final dense layer).
    pub fn num_classes(&self) -> usize {
        match self.layers.last() {
            Some(&LayerSpec::Dense { out_features, .. }) => out_features,
            _ => 0,
        }
    }

    /// Index of the final classification layer.
    pub fn classifier_layer(&self) -> usize {
        self.layers
            .iter()
            .rposition(LayerSpec::is_parameterized)
            .expect("validated arch has a parameterized layer")
    }

    /// Indices of parameterized layers, shallow to deep.
    pub fn parameterized_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_parameterized())
            .map(|(i, _)| i)
            .collect()
    }

    /// Parse the canonical one-line encoding.
    pub fn parse(text: &str) -> Result<ArchSpec> {
        let mut input = None;
        let mut layers = Vec::new();
        for segment in text.split('|') {
            let toks: Vec<&str> = segment.split_whitespace().collect();
            if toks.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Config(format!("bad arch segment '{}': {msg}", segment.trim()));
            let num = |s: &str| -> Result<usize> {
                s.parse::<usize>()
                    .map_err(|_| bad(&format!("'{s}' is not a number")))
            };
            match toks[0] {
                "input" => {
                    input = Some(match toks.len() {
                        2 => Shape::Flat(num(toks[1])?),
                        4 => Shape::Chw(num(toks[1])?, num(toks[2])?, num(toks[3])?),
                        _ => return Err(bad("input takes 1 (flat) or 3 (c h w) dims")),
                    });
                }
                "dense" => {
                    let bias = match toks.len() {
                        3 => true,
                        4 if toks[3] == "nobias" => false,
                        _ => return Err(bad("dense takes in out [nobias]")),
                    };
                    layers.push(LayerSpec::Dense {
                        in_features: num(toks[1])?,
                        out_features: num(toks[2])?,
                        bias,
                    });
                }
                "conv2d" => {
                    let bias = match toks.len() {
                        4 => true,
                        5 if toks[4] == "nobias" => false,
                        _ => return Err(bad("conv2d takes in out kernel [nobias]")),
                    };
                    layers.push(LayerSpec::Conv2d {
                        in_channels: num(toks[1])?,
                        out_channels: num(toks[2])?,
                        kernel: num(toks[3])?,
                        bias,
                    });
                }
                "relu" => layers.push(LayerSpec::Relu),
                "flatten" => layers.push(LayerSpec::Flatten),
                other => return Err(bad(&format!("unknown layer kind '{other}'"))),
            }
        }
        let input =
            input.ok_or_else(|| Error::Config("arch string must start with 'input ...'".into()))?;
        let arch = ArchSpec { input, layers };
        arch.validate()?;
        Ok(arch)
    }
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "input {}", self.input)?;
        for layer in &self.layers {
            write!(f, " | {layer}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trips_canonical_form() {
        let text = "input 1 8 8 | conv2d 1 6 3 | relu | flatten | dense 216 32 | relu | dense 32 8";
        let arch = ArchSpec::parse(text).unwrap();
        assert_eq!(arch.to_string(), text);
        assert_eq!(arch.param_count(), 6 * 10 + 32 * 217 + 8 * 33);
        assert_eq!(arch.num_classes(), 8);
        assert_eq!(arch.classifier_layer(), 5);
        assert_eq!(arch.parameterized_layers(), vec![0, 3, 5]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let err = ArchSpec::parse("input 4 | dense 5 3").unwrap_err();
        assert!(matches!(err, Error::Dimension(_)), "{err}");
    }

    #[test]
    fn non_dense_tail_is_rejected() {
        let err = ArchSpec::parse("input 4 | dense 4 3 | relu").unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn conv_too_small_input_is_rejected() {
        let err = ArchSpec::parse("input 1 2 2 | conv2d 1 4 3 | flatten | dense 0 2").unwrap_err();
        assert!(matches!(err, Error::Dimension(_)), "{err}");
    }
}
