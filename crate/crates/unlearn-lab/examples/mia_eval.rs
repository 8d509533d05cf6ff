//! Membership inference evaluation: correctness- and confidence-based
//! attacks against the original, an unlearned, and the oracle model.
//!
//! The score is the fraction of forget examples the attacker calls unseen;
//! the ideal value is the oracle's score, not 1.0.
//!
//! Run with: `cargo run --release --example mia_eval`

use unlearn_lab::data::{
    make_split, mia_calibration_subset, ForgetKind, ForgetSpec, MeanStructure, SyntheticSpec,
};
use unlearn_lab::evaluation::{mia_score, FeatureKind};
use unlearn_lab::localization::{build_mask_for_model, criticality_scores, Criterion};
use unlearn_lab::nn::{run_sgd, ArchSpec, LossSpec, Model, Schedule, TrainLoopConfig};
use unlearn_lab::unlearning::{reset_finetune, retrain_oracle, Algorithm, TrainRecipe, UnlearnConfig};

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
    let seed = 0u64;

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

    let scores = criticality_scores(&original, &forget, Criterion::WeightedGradForget, 1, 128)?;
    let mask = build_mask_for_model(&scores, &original, 0.16, "del")?;
    let unlearned = reset_finetune(
        &original,
        Some(&mask),
        &retain,
        &UnlearnConfig::new(Algorithm::Rft, 40, 0.025, 64, seed),
    )?;

    // calibration: a retain subset matched to the test set's size and label
    // histogram plays "seen"; the test set plays "unseen"
    let calib = mia_calibration_subset(&retain, &test, 99)?;
    println!(
        "calibration subset: {} examples, {} warnings",
        calib.indices.len(),
        calib.warnings.len()
    );
    let calib_seen = train.subset(calib.indices);
    let test_view = test.view();

    println!(
        "\n{:<12} {:>14} {:>8} {:>14} {:>8}",
        "model", "correctness", "(atk)", "confidence", "(atk)"
    );
    for (name, model) in [
        ("original", &original),
        ("unlearned", &unlearned.model),
        ("oracle", &oracle.model),
    ] {
        let cor = mia_score(model, &calib_seen, &test_view, &forget, FeatureKind::Correctness)?;
        let con = mia_score(model, &calib_seen, &test_view, &forget, FeatureKind::Confidence)?;
        println!(
            "{:<12} {:>8}/{:<5} {:>8.3} {:>8}/{:<5} {:>8.3}",
            name, cor.tn, cor.forget_size, cor.attacker_train_acc, con.tn, con.forget_size,
            con.attacker_train_acc
        );
        println!(
            "{:<12} score {:>8.3}        score {:>19.3}",
            "", cor.score, con.score
        );
    }
    println!("\n(the unlearned model should match the oracle's scores, not 1.0)");
    Ok(())
}
