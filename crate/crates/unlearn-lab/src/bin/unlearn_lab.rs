//! Thin CLI over the library: train, unlearn, evaluate, sweep, compare.
//! Exit codes: 0 success, 2 config error, 3 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use unlearn_lab::harness::{
    cmd_compare, cmd_evaluate, cmd_sweep, cmd_train, cmd_unlearn, load_experiment, Layout,
    RunFlags,
};

#[derive(Parser)]
#[command(name = "unlearn-lab", version, about = "Localized machine unlearning laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Replace the config's seeds list with a single seed.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Parallel workers for independent runs.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Print the run matrix and execute nothing.
    #[arg(long)]
    dry_run: bool,
    /// Skip runs whose manifests already exist.
    #[arg(long)]
    resume: bool,
    /// Output root (overrides config and UNLEARN_LAB_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the original model for every seed.
    Train(CommonArgs),
    /// Build masks and run the unlearning matrix.
    Unlearn(CommonArgs),
    /// Train/load oracles, evaluate all cells, emit the summary table.
    Evaluate(CommonArgs),
    /// End-to-end budget sweep with per-cell learning-rate selection.
    Sweep(CommonArgs),
    /// Diff two summary CSVs.
    Compare {
        a: PathBuf,
        b: PathBuf,
    },
}

fn flags(args: &CommonArgs) -> RunFlags {
    RunFlags {
        workers: args.workers.max(1),
        dry_run: args.dry_run,
        resume: args.resume,
    }
}

fn run() -> unlearn_lab::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(args) => {
            let exp = load_experiment(&args.config, args.out.as_deref(), args.seed_override)?;
            let lines = cmd_train(&exp, flags(&args))?;
            if args.dry_run {
                for line in lines {
                    println!("{line}");
                }
            } else {
                println!(
                    "trained {} original model(s) under {}",
                    exp.seeds.len(),
                    Layout::new(&exp.output_root, &exp.config_hash).root.display()
                );
            }
            Ok(())
        }
        Command::Unlearn(args) => {
            let exp = load_experiment(&args.config, args.out.as_deref(), args.seed_override)?;
            let lines = cmd_unlearn(&exp, flags(&args))?;
            if args.dry_run {
                for line in lines {
                    println!("{line}");
                }
            } else {
                println!("completed {} run(s)", lines.len());
            }
            Ok(())
        }
        Command::Evaluate(args) => {
            let exp = load_experiment(&args.config, args.out.as_deref(), args.seed_override)?;
            let rows = cmd_evaluate(&exp, flags(&args))?;
            let layout = Layout::new(&exp.output_root, &exp.config_hash);
            println!("{}", unlearn_lab::evaluation::rows_to_text(&rows));
            println!("summary: {}", layout.summary_csv().display());
            Ok(())
        }
        Command::Sweep(args) => {
            let exp = load_experiment(&args.config, args.out.as_deref(), args.seed_override)?;
            if args.dry_run {
                let lines = cmd_unlearn(
                    &exp,
                    RunFlags {
                        dry_run: true,
                        ..flags(&args)
                    },
                )?;
                for line in lines {
                    println!("{line}");
                }
                return Ok(());
            }
            let rows = cmd_sweep(&exp, flags(&args))?;
            let layout = Layout::new(&exp.output_root, &exp.config_hash);
            println!("{}", unlearn_lab::evaluation::rows_to_text(&rows));
            println!("summary: {}", layout.summary_csv().display());
            println!("curves:  {}", layout.sweep_curves_csv().display());
            Ok(())
        }
        Command::Compare { a, b } => {
            let report = cmd_compare(&a, &b)?;
            print!("{report}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
