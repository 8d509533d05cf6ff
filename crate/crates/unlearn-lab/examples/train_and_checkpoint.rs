//! Train a small classifier on synthetic data and round-trip it through the
//! checkpoint format.
//!
//! Run with: `cargo run --release --example train_and_checkpoint`

use unlearn_lab::data::{MeanStructure, SyntheticSpec};
use unlearn_lab::evaluation::accuracy;
use unlearn_lab::nn::{checkpoint, run_sgd, ArchSpec, LossSpec, Model, Schedule, TrainLoopConfig};

fn main() -> unlearn_lab::Result<()> {
    let spec = SyntheticSpec {
        classes: 4,
        dim: 64,
        train_n: 512,
        test_n: 128,
        mean_scale: 1.8,
        noise: 0.9,
        structure: MeanStructure::Bumps,
        label_noise: 0.0,
        seed: 3,
    };
    let (train, test) = spec.generate()?;

    let arch = ArchSpec::parse(
        "input 1 8 8 | conv2d 1 4 3 | relu | flatten | dense 144 24 | relu | dense 24 4",
    )?;
    println!("architecture: {arch}");
    let mut model = Model::init(arch, 0)?;
    println!("parameters:   {}", model.param_count());

    let mask = vec![true; model.param_count()];
    let result = run_sgd(
        &mut model,
        &train.view(),
        &mask,
        &TrainLoopConfig {
            epochs: 20,
            batch_size: 32,
            momentum: 0.9,
            weight_decay: 0.0,
            schedule: Schedule::cosine(0.08, 0.01, 1),
            loss: LossSpec::cross_entropy(),
            negate: false,
            seed: 0,
        },
    )?;
    println!(
        "trained {} steps; final batch loss {:.4}",
        result.steps_taken,
        result.loss_trace.last().unwrap()
    );
    println!(
        "train acc {:.3} | test acc {:.3}",
        accuracy(&model, &train.view())?,
        accuracy(&model, &test.view())?
    );

    let dir = std::env::temp_dir().join("unlearn-lab-example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let path = dir.join("model.ckpt");
    checkpoint::save(&model, &path)?;
    let back = checkpoint::load(&path)?;
    let identical = model
        .params()
        .iter()
        .zip(back.params())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    println!("checkpoint round-trip at {} bit-exact: {identical}", path.display());
    Ok(())
}
