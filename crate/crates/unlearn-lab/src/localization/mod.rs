//! Parameter localization: criticality scoring under multiple criteria and
//! granularities, and budgeted mask construction for every strategy.

pub mod critmem;
pub mod mask;
pub mod scores;
pub mod strategies;

pub use critmem::{critmem_mask, default_max_channels, CritMemOutcome};
pub use mask::Mask;
pub use scores::{
    aggregate_neuron_scores, criticality_scores, neuron_topk_avg, CriticalityScores, Criterion,
    NeuronScore,
};
pub use strategies::{
    build_mask, build_mask_for_model, layer_mask, random_matched_mask, salloc_mask,
    top_k_param_mask, LayerEnd, MatchGranularity,
};
