//! Budget sweep through the orchestration layer: expands the strategy x
//! algorithm x alpha x seed matrix, picks learning rates on a held-out
//! validation seed, and emits per-alpha curves.
//!
//! Run with: `cargo run --release --example budget_sweep`

use unlearn_lab::harness::{cmd_sweep, ConfigFile, Layout, RunFlags};

const CONFIG: &str = r#"
schema_version = 1
seeds = [0, 1]
validation_seed = 50

[dataset]
kind = "synthetic"
classes = 8
dim = 64
train_n = 512
test_n = 256
mean_scale = 2.0
noise = 0.8
structure = "bumps"
label_noise = 0.1
seed = 7

[model]
arch = "input 1 8 8 | conv2d 1 6 1 | relu | flatten | dense 384 32 | relu | dense 32 8"

[train]
epochs = 30
lr = 0.08
batch_size = 64

[forget]
kind = "non_iid"
fraction = 0.10
classes = [2, 5]

[[strategy]]
name = "del"
alphas = [0.1, 0.2, 0.3]

[[algorithm]]
name = "rft"
epochs = 20
lr = 0.03
lr_candidates = [0.015, 0.03, 0.06]
"#;

fn main() -> unlearn_lab::Result<()> {
    let out = std::env::temp_dir().join("unlearn-lab-sweep-example");
    let cfg = ConfigFile::parse(CONFIG, "inline")?;
    let exp = cfg.resolve(CONFIG, Some(&out), None)?;
    let rows = cmd_sweep(
        &exp,
        RunFlags {
            workers: 2,
            dry_run: false,
            resume: false,
        },
    )?;

    println!("{}", unlearn_lab::evaluation::rows_to_text(&rows));
    let layout = Layout::new(&exp.output_root, &exp.config_hash);
    println!("curves (alpha ascending, chosen lr per cell):");
    print!(
        "{}",
        std::fs::read_to_string(layout.sweep_curves_csv()).expect("curves written")
    );
    println!("\nartifacts under {}", layout.root.display());
    Ok(())
}
