//! The model: an architecture plus a flat, addressable parameter store.
//!
//! Parameters are laid out neuron-major: within each parameterized layer,
//! every output unit/channel owns one contiguous range holding its incoming
//! weights followed by its bias. This makes each neuron group a single
//! `Range<usize>` into the flat vector, which the localization strategies
//! rely on.

use std::ops::Range;

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::arch::{ArchSpec, LayerSpec};

/// Identifies one neuron/channel group and its parameter range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeuronGroup {
    /// Index into `arch.layers`.
    pub layer: usize,
    /// Output unit/channel index within that layer.
    pub neuron: usize,
    /// Contiguous range of parameter indices owned by this group.
    pub range: Range<usize>,
}

/// A layered classifier with a flat parameter vector of length `p`.
#[derive(Debug, Clone)]
pub struct Model {
    arch: ArchSpec,
    params: Vec<f32>,
    /// Per-layer parameter index ranges, aligned with `arch.layers`
    /// (empty ranges for relu/flatten).
    layer_offsets: Vec<Range<usize>>,
    /// Per-layer list of neuron group ranges.
    neuron_table: Vec<Vec<Range<usize>>>,
    classifier_layer: usize,
    /// Seed used for the initial draw; recorded in checkpoints.
    init_seed: u64,
}

/// Name of the weight initialization scheme, recorded in checkpoint headers.
pub const INIT_SCHEME: &str = "kaiming_uniform_fan_in";

impl Model {
    /// Build a model with all parameters zero.
    pub fn zeros(arch: ArchSpec) -> Result<Model> {
        arch.validate()?;
        let p = arch.param_count();
        let mut layer_offsets = Vec::with_capacity(arch.layers.len());
        let mut neuron_table = Vec::with_capacity(arch.layers.len());
        let mut cursor = 0usize;
        for layer in &arch.layers {
            let count = layer.param_count();
            let range = cursor..cursor + count;
            let group = layer.group_size();
            let groups = (0..layer.neuron_count())
                .map(|n| {
                    let start = range.start + n * group;
                    start..start + group
                })
                .collect();
            neuron_table.push(groups);
            layer_offsets.push(range);
            cursor += count;
        }
        debug_assert_eq!(cursor, p);
        let classifier_layer = arch.classifier_layer();
        Ok(Model {
            arch,
            params: vec![0.0; p],
            layer_offsets,
            neuron_table,
            classifier_layer,
            init_seed: 0,
        })
    }

    /// Build a freshly initialized model: Kaiming-uniform fan-in weights,
    /// zero biases, drawn deterministically from `seed`.
    pub fn init(arch: ArchSpec, seed: u64) -> Result<Model> {
        let mut model = Model::zeros(arch)?;
        let all = vec![true; model.param_count()];
        model.redraw(&all, seed);
        model.init_seed = seed;
        Ok(model)
    }

    /// Build a model from an existing flat parameter vector.
    pub fn from_params(arch: ArchSpec, params: Vec<f32>, init_seed: u64) -> Result<Model> {
        let mut model = Model::zeros(arch)?;
        if params.len() != model.param_count() {
            return Err(Error::Dimension(format!(
                "parameter vector has {} entries, architecture needs {}",
                params.len(),
                model.param_count()
            )));
        }
        model.params = params;
        model.init_seed = init_seed;
        Ok(model)
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes()
    }

    /// Parameter range of a layer (empty for parameterless layers).
    pub fn layer_range(&self, layer: usize) -> Range<usize> {
        self.layer_offsets[layer].clone()
    }

    /// Index of the final classification layer.
    pub fn classifier_layer(&self) -> usize {
        self.classifier_layer
    }

    /// Parameter range of the classifier layer.
    pub fn classifier_range(&self) -> Range<usize> {
        self.layer_offsets[self.classifier_layer].clone()
    }

    /// Neuron group ranges of one layer.
    pub fn layer_groups(&self, layer: usize) -> &[Range<usize>] {
        &self.neuron_table[layer]
    }

    /// All neuron groups of the network, shallow to deep.
    pub fn neuron_groups(&self) -> Vec<NeuronGroup> {
        let mut out = Vec::new();
        for (layer, groups) in self.neuron_table.iter().enumerate() {
            for (neuron, range) in groups.iter().enumerate() {
                out.push(NeuronGroup {
                    layer,
                    neuron,
                    range: range.clone(),
                });
            }
        }
        out
    }

    /// Total number of neuron groups.
    pub fn neuron_group_count(&self) -> usize {
        self.neuron_table.iter().map(Vec::len).sum()
    }

    /// Layer that owns parameter index `j`.
    pub fn layer_of_param(&self, j: usize) -> usize {
        self.layer_offsets
            .iter()
            .position(|r| r.contains(&j))
            .expect("parameter index in range")
    }

    /// Redraw the parameters selected by `mask` from the layer initialization
    /// distribution. Unselected parameters are untouched. The draw is a pure
    /// function of (mask, seed, architecture).
    pub fn redraw(&mut self, mask: &[bool], seed: u64) {
        assert_eq!(mask.len(), self.params.len(), "mask length must equal p");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (layer_idx, layer) in self.arch.layers.iter().enumerate() {
            if !layer.is_parameterized() {
                continue;
            }
            let bound = (6.0 / layer.fan_in() as f64).sqrt();
            let group = layer.group_size();
            let has_bias = matches!(
                layer,
                LayerSpec::Dense { bias: true, .. } | LayerSpec::Conv2d { bias: true, .. }
            );
            let range = self.layer_offsets[layer_idx].clone();
            for j in range {
                if !mask[j] {
                    continue;
                }
                let offset_in_group = (j - self.layer_offsets[layer_idx].start) % group;
                let is_bias = has_bias && offset_in_group == group - 1;
                self.params[j] = if is_bias {
                    0.0
                } else {
                    rng.random_range(-bound..bound) as f32
                };
            }
        }
    }
}

/// Reinitialize the parameters selected by `mask`; the rest are unchanged.
/// Callers that keep optimizer state must zero the velocity of redrawn
/// entries themselves.
pub fn reinit_params(model: &Model, mask: &[bool], seed: u64) -> Model {
    let mut fresh = model.clone();
    fresh.redraw(mask, seed);
    fresh
}
