//! Mask construction strategies: channel-greedy budgeted selection, top-k
//! parameter saliency, layer masks, and per-layer-matched random controls.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::DatasetView;
use crate::error::{Error, Result};
use crate::localization::mask::Mask;
use crate::localization::scores::CriticalityScores;
use crate::nn::train::mix_seed;
use crate::nn::Model;

/// Order neuron scores descending, ties broken by ascending (layer, neuron).
fn sorted_neuron_order(scores: &CriticalityScores) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.neuron_scores.len()).collect();
    order.sort_by(|&a, &b| {
        let na = &scores.neuron_scores[a];
        let nb = &scores.neuron_scores[b];
        nb.score
            .partial_cmp(&na.score)
            .expect("finite scores")
            .then(na.layer.cmp(&nb.layer))
            .then(na.neuron.cmp(&nb.neuron))
    });
    order
}

/// Greedy whole-neuron selection under a parameter budget of
/// `floor(alpha * p)`: walk neurons in descending criticality and include
/// each whole group while it fits; stop at the first group that would
/// overflow (no skip-ahead).
pub fn build_mask(
    scores: &CriticalityScores,
    neuron_ranges: &[std::ops::Range<usize>],
    alpha: f64,
    p: usize,
    tag: impl Into<String>,
) -> Result<Mask> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must be in [0, 1], got {alpha}")));
    }
    if neuron_ranges.len() != scores.neuron_scores.len() {
        return Err(Error::Dimension(format!(
            "{} neuron ranges for {} neuron scores",
            neuron_ranges.len(),
            scores.neuron_scores.len()
        )));
    }
    let budget = (alpha * p as f64).floor() as usize;
    let mut bits = vec![false; p];
    let mut used = 0usize;
    for idx in sorted_neuron_order(scores) {
        let count = scores.neuron_scores[idx].param_count;
        if used + count > budget {
            break;
        }
        used += count;
        for j in neuron_ranges[idx].clone() {
            bits[j] = true;
        }
    }
    Ok(Mask::new(bits, alpha, tag))
}

/// Convenience wrapper taking the neuron ranges from the model.
pub fn build_mask_for_model(
    scores: &CriticalityScores,
    model: &Model,
    alpha: f64,
    tag: impl Into<String>,
) -> Result<Mask> {
    let ranges: Vec<std::ops::Range<usize>> = model
        .neuron_groups()
        .into_iter()
        .map(|g| g.range)
        .collect();
    build_mask(scores, &ranges, alpha, model.param_count(), tag)
}

/// Top `floor(alpha * p)` individual parameters by score, ties broken by
/// ascending index. This is the selection rule behind saliency-based
/// localization; callers provide scores from whichever criterion they want.
pub fn top_k_param_mask(
    param_scores: &[f64],
    alpha: f64,
    tag: impl Into<String>,
) -> Result<Mask> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must be in [0, 1], got {alpha}")));
    }
    let p = param_scores.len();
    let k = (alpha * p as f64).floor() as usize;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        param_scores[b]
            .partial_cmp(&param_scores[a])
            .expect("finite scores")
            .then(a.cmp(&b))
    });
    let mut bits = vec![false; p];
    for &j in &order[..k] {
        bits[j] = true;
    }
    Ok(Mask::new(bits, alpha, tag))
}

/// Saliency localization: |accumulated gradient over the forget set| per
/// parameter, then top `floor(alpha * p)` parameters.
pub fn salloc_mask(
    model: &Model,
    forget: &DatasetView<'_>,
    alpha: f64,
    batch_size: usize,
) -> Result<Mask> {
    use crate::localization::scores::{criticality_scores, Criterion};
    if forget.is_empty() {
        return Err(Error::Empty("saliency mask needs a non-empty forget set".into()));
    }
    let scores = criticality_scores(model, forget, Criterion::GradForget, 1, batch_size)?;
    top_k_param_mask(&scores.param_scores, alpha, "salloc")
}

/// Which end of the network a layer mask counts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerEnd {
    /// Closest to the output.
    Deepest,
    /// Closest to the input.
    Shallowest,
}

/// Select all parameters of the `k` parameterized layers counted from the
/// chosen end; relu/flatten are skipped in the counting.
pub fn layer_mask(model: &Model, k: usize, end: LayerEnd) -> Result<Mask> {
    let param_layers = model.arch().parameterized_layers();
    if k == 0 || k > param_layers.len() {
        return Err(Error::Config(format!(
            "k must be in 1..={}, got {k}",
            param_layers.len()
        )));
    }
    let chosen: Vec<usize> = match end {
        LayerEnd::Shallowest => param_layers[..k].to_vec(),
        LayerEnd::Deepest => param_layers[param_layers.len() - k..].to_vec(),
    };
    let mut bits = vec![false; model.param_count()];
    for layer in chosen {
        for j in model.layer_range(layer) {
            bits[j] = true;
        }
    }
    let popcount = bits.iter().filter(|&&b| b).count();
    let alpha = popcount as f64 / model.param_count() as f64;
    let tag = match end {
        LayerEnd::Deepest => format!("deepest(k={k})"),
        LayerEnd::Shallowest => format!("shallowest(k={k})"),
    };
    Ok(Mask::new(bits, alpha, tag))
}

/// Granularity of the random matched control.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchGranularity {
    Channel,
    Parameter,
}

/// Build a random control mask with the same per-layer selection counts as
/// `reference`, at channel or parameter granularity.
pub fn random_matched_mask(
    reference: &Mask,
    model: &Model,
    granularity: MatchGranularity,
    seed: u64,
) -> Result<Mask> {
    if reference.len() != model.param_count() {
        return Err(Error::Dimension(format!(
            "reference mask has {} bits for p={}",
            reference.len(),
            model.param_count()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x3a7c));
    let mut bits = vec![false; model.param_count()];
    for layer in model.arch().parameterized_layers() {
        match granularity {
            MatchGranularity::Channel => {
                let groups = model.layer_groups(layer);
                let mut selected_channels = 0usize;
                for g in groups {
                    let pc = reference.popcount_in(g.clone());
                    if pc == g.len() {
                        selected_channels += 1;
                    } else if pc != 0 {
                        return Err(Error::Validation(format!(
                            "reference mask is not channel-aligned in layer {layer}: group {g:?} has {pc}/{} bits",
                            g.len()
                        )));
                    }
                }
                let mut candidates: Vec<usize> = (0..groups.len()).collect();
                candidates.shuffle(&mut rng);
                for &c in candidates.iter().take(selected_channels) {
                    for j in groups[c].clone() {
                        bits[j] = true;
                    }
                }
            }
            MatchGranularity::Parameter => {
                let range = model.layer_range(layer);
                let count = reference.popcount_in(range.clone());
                let mut candidates: Vec<usize> = range.collect();
                candidates.shuffle(&mut rng);
                for &j in candidates.iter().take(count) {
                    bits[j] = true;
                }
            }
        }
    }
    let tag = format!("random_matched({})", reference.strategy_tag);
    Ok(Mask::new(bits, reference.alpha, tag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localization::scores::{Criterion, CriticalityScores, NeuronScore};
    use crate::nn::ArchSpec;

    fn score_table(entries: &[(usize, usize, f64, usize)]) -> (CriticalityScores, Vec<std::ops::Range<usize>>) {
        // entries: (layer, neuron, score, param_count); ranges laid end to end
        let mut ranges = Vec::new();
        let mut cursor = 0usize;
        let neuron_scores = entries
            .iter()
            .map(|&(layer, neuron, score, param_count)| {
                ranges.push(cursor..cursor + param_count);
                cursor += param_count;
                NeuronScore {
                    layer,
                    neuron,
                    score,
                    param_count,
                }
            })
            .collect();
        (
            CriticalityScores {
                param_scores: vec![0.0; cursor],
                neuron_scores,
                h: 1,
                criterion: Criterion::WeightedGradForget,
            },
            ranges,
        )
    }

    #[test]
    fn greedy_hand_trace() {
        // A(0.9, 4 params), B(0.5, 3), C(0.1, 2), p = 10, alpha = 0.7:
        // budget 7 -> A and B fit (7), C would overflow -> 7 bits
        let (scores, ranges) = score_table(&[(0, 0, 0.9, 4), (0, 1, 0.5, 3), (0, 2, 0.1, 2)]);
        let mask = build_mask(&scores, &ranges, 0.7, 10, "t").unwrap();
        assert_eq!(mask.popcount(), 7);
        assert!(mask.bits[..7].iter().all(|&b| b));
        assert!(!mask.bits[7..].iter().any(|&b| b));
    }

    #[test]
    fn greedy_stops_at_first_overflow_without_skip_ahead() {
        // B overflows the budget even though C alone would fit
        let (scores, ranges) = score_table(&[(0, 0, 0.9, 4), (0, 1, 0.5, 6), (0, 2, 0.1, 1)]);
        let mask = build_mask(&scores, &ranges, 0.5, 11, "t").unwrap(); // budget 5
        assert_eq!(mask.popcount(), 4, "only A selected; no skip to C");
    }

    #[test]
    fn alpha_one_selects_everything_alpha_zero_nothing() {
        let (scores, ranges) = score_table(&[(0, 0, 0.9, 4), (1, 0, 0.5, 6)]);
        let full = build_mask(&scores, &ranges, 1.0, 10, "t").unwrap();
        assert_eq!(full.popcount(), 10);
        let none = build_mask(&scores, &ranges, 0.0, 10, "t").unwrap();
        assert_eq!(none.popcount(), 0);
    }

    #[test]
    fn ties_break_by_layer_then_neuron() {
        let (scores, ranges) = score_table(&[(1, 0, 0.5, 2), (0, 1, 0.5, 2), (0, 0, 0.5, 2)]);
        let mask = build_mask(&scores, &ranges, 0.67, 6, "t").unwrap(); // budget 4
        // (0,0) then (0,1) selected; (1,0) left out
        assert_eq!(mask.popcount(), 4);
        assert!(mask.bits[2] && mask.bits[3] && mask.bits[4] && mask.bits[5]);
        assert!(!mask.bits[0] && !mask.bits[1]);
    }

    #[test]
    fn top_k_hand_trace() {
        let mask = top_k_param_mask(&[0.9, 0.1, 0.5, 0.4], 0.5, "t").unwrap();
        assert_eq!(mask.set_indices(), vec![0, 2]);
        let full = top_k_param_mask(&[0.9, 0.1, 0.5, 0.4], 1.0, "t").unwrap();
        assert_eq!(full.popcount(), 4);
    }

    #[test]
    fn top_k_all_zero_scores_take_lowest_indices() {
        let mask = top_k_param_mask(&[0.0; 6], 0.5, "t").unwrap();
        assert_eq!(mask.set_indices(), vec![0, 1, 2]);
    }

    #[test]
    fn layer_mask_endpoints() {
        let arch =
            ArchSpec::parse("input 1 4 4 | conv2d 1 2 2 | relu | flatten | dense 18 4 | relu | dense 4 3")
                .unwrap();
        let model = Model::zeros(arch).unwrap();
        let all = layer_mask(&model, 3, LayerEnd::Deepest).unwrap();
        assert_eq!(all.popcount(), model.param_count());

        let deepest = layer_mask(&model, 1, LayerEnd::Deepest).unwrap();
        assert_eq!(deepest.set_indices(), model.layer_range(5).collect::<Vec<_>>());

        let shallowest = layer_mask(&model, 1, LayerEnd::Shallowest).unwrap();
        assert_eq!(
            shallowest.set_indices(),
            model.layer_range(0).collect::<Vec<_>>()
        );

        assert!(layer_mask(&model, 0, LayerEnd::Deepest).is_err());
        assert!(layer_mask(&model, 4, LayerEnd::Deepest).is_err());
    }

    #[test]
    fn random_matched_counts_follow_reference_per_layer() {
        let arch =
            ArchSpec::parse("input 1 4 4 | conv2d 1 4 2 | relu | flatten | dense 36 6 | dense 6 3")
                .unwrap();
        let model = Model::zeros(arch).unwrap();
        // reference: 3 channels of layer 3 (the first dense), nothing else
        let mut bits = vec![false; model.param_count()];
        for g in &model.layer_groups(3)[..3] {
            for j in g.clone() {
                bits[j] = true;
            }
        }
        let reference = Mask::new(bits, 0.3, "ref");

        let chan = random_matched_mask(&reference, &model, MatchGranularity::Channel, 5).unwrap();
        for layer in model.arch().parameterized_layers() {
            assert_eq!(
                chan.popcount_in(model.layer_range(layer)),
                reference.popcount_in(model.layer_range(layer)),
                "layer {layer} count mismatch"
            );
        }
        assert!(chan.is_channel_aligned(&model));

        let param =
            random_matched_mask(&reference, &model, MatchGranularity::Parameter, 5).unwrap();
        for layer in model.arch().parameterized_layers() {
            assert_eq!(
                param.popcount_in(model.layer_range(layer)),
                reference.popcount_in(model.layer_range(layer))
            );
        }

        let again = random_matched_mask(&reference, &model, MatchGranularity::Channel, 5).unwrap();
        assert_eq!(chan.bits, again.bits, "seeded control is deterministic");
        let other = random_matched_mask(&reference, &model, MatchGranularity::Channel, 6).unwrap();
        assert_ne!(chan.bits, other.bits);
    }

    #[test]
    fn channel_matching_rejects_misaligned_reference() {
        let arch = ArchSpec::parse("input 4 | dense 4 3").unwrap();
        let model = Model::zeros(arch).unwrap();
        let mut bits = vec![false; model.param_count()];
        bits[0] = true; // half a neuron group
        let reference = Mask::new(bits, 0.1, "ref");
        let err =
            random_matched_mask(&reference, &model, MatchGranularity::Channel, 0).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }
}
