//! Random-vs-standard masking control experiment.
//!
//! Builds the channel-granular weighted-gradient mask and a per-layer-matched
//! random control, runs reset+finetune with both, and compares each model's
//! forget-set gap to the retrain oracle across seeds. If localization works,
//! the standard mask tracks the oracle and the random twin lags behind:
//! picking WHICH parameters to reset matters, not just how many.
//!
//! Mirrors `configs/desk_control.toml`; the same experiment runs end to end
//! with the CLI:
//!
//! ```text
//! unlearn-lab train    --config configs/desk_control.toml --workers 3
//! unlearn-lab unlearn  --config configs/desk_control.toml --workers 3
//! unlearn-lab evaluate --config configs/desk_control.toml --workers 3
//! ```
//!
//! Run with: `cargo run --release --example random_mask_control`

use unlearn_lab::data::{make_split, ForgetKind, ForgetSpec, MeanStructure, SyntheticSpec};
use unlearn_lab::evaluation::{accuracy, mean_ci95};
use unlearn_lab::localization::{
    build_mask_for_model, criticality_scores, random_matched_mask, Criterion, MatchGranularity,
};
use unlearn_lab::nn::{run_sgd, ArchSpec, LossSpec, Model, Schedule, TrainLoopConfig};
use unlearn_lab::unlearning::{
    reset_finetune, retrain_oracle, Algorithm, TrainRecipe, UnlearnConfig,
};

const ALPHA: f64 = 0.16;
const SEEDS: [u64; 3] = [0, 1, 2];

fn main() -> unlearn_lab::Result<()> {
    let spec = SyntheticSpec {
        classes: 8,
        dim: 64,
        train_n: 1024,
        test_n: 512,
        mean_scale: 2.0,
        noise: 0.8,
        structure: MeanStructure::Bumps,
        label_noise: 0.12,
        seed: 7,
    };
    let (train, test) = spec.generate()?;
    let arch = ArchSpec::parse(
        "input 1 8 8 | conv2d 1 6 1 | relu | flatten | dense 384 64 | relu | dense 64 16 | relu | dense 16 8",
    )?;

    let mut del_gaps = Vec::new();
    let mut random_gaps = Vec::new();
    for seed in SEEDS {
        // original model on all of the training data
        let mut original = Model::init(arch.clone(), seed)?;
        let full_mask = vec![true; original.param_count()];
        run_sgd(
            &mut original,
            &train.view(),
            &full_mask,
            &TrainLoopConfig {
                epochs: 50,
                batch_size: 64,
                momentum: 0.9,
                weight_decay: 0.0,
                schedule: Schedule::cosine(0.08, 0.01, 1),
                loss: LossSpec::cross_entropy(),
                negate: false,
                seed,
            },
        )?;

        let split = make_split(
            &train,
            &ForgetSpec {
                kind: ForgetKind::NonIid,
                fraction: 0.10,
                classes: vec![2, 5],
                seed,
            },
        )?;
        let forget = split.forget_view(&train);
        let retain = split.retain_view(&train);

        // oracle: fresh training on retain only
        let oracle = retrain_oracle(
            &retain,
            &arch,
            &TrainRecipe {
                epochs: 25,
                schedule: Schedule::cosine(0.04, 0.01, 1),
                batch_size: 64,
                momentum: 0.9,
                weight_decay: 0.0,
            },
            seed,
        )?;

        // standard mask: channel-granular weighted gradients on the forget set
        let scores = criticality_scores(&original, &forget, Criterion::WeightedGradForget, 1, 128)?;
        let del_mask = build_mask_for_model(&scores, &original, ALPHA, "del")?;
        let random_mask =
            random_matched_mask(&del_mask, &original, MatchGranularity::Channel, seed)?;

        let cfg = UnlearnConfig::new(Algorithm::Rft, 40, 0.025, 64, seed);
        let del_run = reset_finetune(&original, Some(&del_mask), &retain, &cfg)?;
        let rand_run = reset_finetune(&original, Some(&random_mask), &retain, &cfg)?;

        let oracle_forget = accuracy(&oracle.model, &forget)?;
        let del_forget = accuracy(&del_run.model, &forget)?;
        let rand_forget = accuracy(&rand_run.model, &forget)?;

        let del_gap = (100.0 * (oracle_forget - del_forget)).abs();
        let rand_gap = (100.0 * (oracle_forget - rand_forget)).abs();
        del_gaps.push(del_gap);
        random_gaps.push(rand_gap);

        println!(
            "seed {seed}: forget acc: original {:.3} | oracle {:.3} | standard {:.3} (|gap| {:.1}) | random {:.3} (|gap| {:.1}) | test: oracle {:.3} standard {:.3}",
            accuracy(&original, &forget)?,
            oracle_forget,
            del_forget,
            del_gap,
            rand_forget,
            rand_gap,
            accuracy(&oracle.model, &test.view())?,
            accuracy(&del_run.model, &test.view())?,
        );
    }

    let advantages: Vec<f64> = random_gaps
        .iter()
        .zip(&del_gaps)
        .map(|(r, d)| r - d)
        .collect();
    let stats = mean_ci95(&advantages);
    println!(
        "\n|forget gap| standard mask: {del_gaps:?}\n|forget gap| random mask:   {random_gaps:?}"
    );
    println!(
        "random-minus-standard advantage: {:.2} +/- {:.2} (95% CI over {} seeds)",
        stats.mean,
        stats.ci95.unwrap_or(f64::NAN),
        advantages.len()
    );
    if stats.mean - stats.ci95.unwrap_or(f64::INFINITY) > 0.0 {
        println!("=> picking WHICH parameters to reset matters, not just how many");
    } else {
        println!("=> difference not significant at this scale");
    }
    Ok(())
}
