//! Build masks with every localization strategy and print what each one
//! selects, layer by layer.
//!
//! Run with: `cargo run --release --example localize_masks`

use unlearn_lab::data::{make_split, ForgetKind, ForgetSpec, MeanStructure, SyntheticSpec};
use unlearn_lab::localization::{
    build_mask_for_model, criticality_scores, critmem_mask, layer_mask, random_matched_mask,
    salloc_mask, Criterion, LayerEnd, Mask, MatchGranularity,
};
use unlearn_lab::nn::{run_sgd, ArchSpec, LossSpec, Model, Schedule, TrainLoopConfig};

const ALPHA: f64 = 0.2;

fn describe(model: &Model, mask: &Mask) {
    let per_layer: Vec<String> = model
        .arch()
        .parameterized_layers()
        .iter()
        .map(|&l| {
            let total = model.layer_range(l).len();
            let selected = mask.popcount_in(model.layer_range(l));
            format!("{selected}/{total}")
        })
        .collect();
    println!(
        "{:<28} popcount {:>5} of {} (alpha {:.3})  per-layer params {}",
        mask.strategy_tag,
        mask.popcount(),
        mask.len(),
        mask.popcount() as f64 / mask.len() as f64,
        per_layer.join("  ")
    );
}

fn main() -> unlearn_lab::Result<()> {
    let spec = SyntheticSpec {
        classes: 8,
        dim: 64,
        train_n: 512,
        test_n: 128,
        mean_scale: 2.0,
        noise: 0.8,
        structure: MeanStructure::Bumps,
        label_noise: 0.1,
        seed: 11,
    };
    let (train, _) = spec.generate()?;
    let arch = ArchSpec::parse(
        "input 1 8 8 | conv2d 1 6 1 | relu | flatten | dense 384 32 | relu | dense 32 8",
    )?;
    let mut model = Model::init(arch, 1)?;
    let full_mask = vec![true; model.param_count()];
    run_sgd(
        &mut model,
        &train.view(),
        &full_mask,
        &TrainLoopConfig {
            epochs: 25,
            batch_size: 64,
            momentum: 0.9,
            weight_decay: 0.0,
            schedule: Schedule::cosine(0.08, 0.01, 1),
            loss: LossSpec::cross_entropy(),
            negate: false,
            seed: 1,
        },
    )?;

    let split = make_split(
        &train,
        &ForgetSpec {
            kind: ForgetKind::NonIid,
            fraction: 0.10,
            classes: vec![2, 5],
            seed: 1,
        },
    )?;
    let forget = split.forget_view(&train);

    println!("budget alpha = {ALPHA} over p = {}\n", model.param_count());

    // one-shot criteria at channel granularity
    for criterion in [
        Criterion::WeightedGradForget,
        Criterion::WeightedGradTrain,
        Criterion::GradForget,
        Criterion::WeightsOnly,
    ] {
        let view = if criterion.uses_forget_set() {
            forget.clone()
        } else {
            train.view()
        };
        let scores = criticality_scores(&model, &view, criterion, 10, 128)?;
        let mask = build_mask_for_model(&scores, &model, ALPHA, format!("{}/channel", criterion.name()))?;
        describe(&model, &mask);
    }

    // parameter-granular saliency
    let sal = salloc_mask(&model, &forget, ALPHA, 128)?;
    describe(&model, &sal);

    // data-agnostic layer masks
    describe(&model, &layer_mask(&model, 1, LayerEnd::Deepest)?);
    describe(&model, &layer_mask(&model, 1, LayerEnd::Shallowest)?);

    // iterative per-example channel search
    let cm = critmem_mask(&model, &forget, 4)?;
    println!(
        "(channel search: {} pre-flipped, {} exhausted of {} examples)",
        cm.pre_flipped,
        cm.exhausted,
        forget.len()
    );
    describe(&model, &cm.mask);

    // matched random control for the first strategy
    let scores = criticality_scores(&model, &forget, Criterion::WeightedGradForget, 10, 128)?;
    let del = build_mask_for_model(&scores, &model, ALPHA, "del")?;
    let random = random_matched_mask(&del, &model, MatchGranularity::Channel, 9)?;
    describe(&model, &random);

    Ok(())
}
