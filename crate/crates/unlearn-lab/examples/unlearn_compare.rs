//! Run every unlearning algorithm under the same mask and compare each one's
//! metrics to the retrain oracle.
//!
//! Run with: `cargo run --release --example unlearn_compare`

use unlearn_lab::data::{make_split, ForgetKind, ForgetSpec, MeanStructure, SyntheticSpec};
use unlearn_lab::evaluation::accuracy;
use unlearn_lab::localization::{build_mask_for_model, criticality_scores, Criterion};
use unlearn_lab::nn::{run_sgd, ArchSpec, LossSpec, Model, Schedule, TrainLoopConfig};
use unlearn_lab::unlearning::{
    retrain_oracle, run_algorithm, Algorithm, TrainRecipe, UnlearnConfig,
};

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
    let oracle_forget = accuracy(&oracle.model, &forget)?;
    let oracle_test = accuracy(&oracle.model, &test.view())?;

    let scores = criticality_scores(&original, &forget, Criterion::WeightedGradForget, 1, 128)?;
    let mask = build_mask_for_model(&scores, &original, 0.16, "del")?;

    println!(
        "{:<14} {:>10} {:>10} {:>10} {:>10}",
        "algorithm", "forget", "test", "d_forget", "d_test"
    );
    println!(
        "{:<14} {:>10.3} {:>10.3} {:>10} {:>10}",
        "oracle", oracle_forget, oracle_test, "0.0", "0.0"
    );
    println!(
        "{:<14} {:>10.3} {:>10.3} {:>10.1} {:>10.1}",
        "original",
        accuracy(&original, &forget)?,
        accuracy(&original, &test.view())?,
        100.0 * (oracle_forget - accuracy(&original, &forget)?),
        100.0 * (oracle_test - accuracy(&original, &test.view())?),
    );

    let cells: Vec<(Algorithm, usize, f64)> = vec![
        (Algorithm::Rft, 40, 0.025),
        (Algorithm::Finetune, 20, 0.02),
        (Algorithm::L1Sparse, 20, 0.02),
        (Algorithm::RandomLabel, 10, 0.005),
        (Algorithm::NeggradPlus, 10, 0.002),
        (Algorithm::Neggrad, 3, 0.0005),
    ];
    for (algorithm, epochs, lr) in cells {
        let cfg = UnlearnConfig::new(algorithm, epochs, lr, 64, seed);
        let out = run_algorithm(&original, Some(&mask), &retain, &forget, &cfg)?;
        let f = accuracy(&out.model, &forget)?;
        let t = accuracy(&out.model, &test.view())?;
        println!(
            "{:<14} {:>10.3} {:>10.3} {:>10.1} {:>10.1}",
            algorithm.name(),
            f,
            t,
            100.0 * (oracle_forget - f),
            100.0 * (oracle_test - t),
        );
    }
    println!("\n(deltas are oracle minus unlearned, percentage points; 0 is ideal)");
    Ok(())
}
