//! The five commands behind the CLI: train, unlearn, evaluate, sweep,
//! compare. Each is an ordinary library function so tests and examples can
//! drive them directly.

use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::evaluation::{
    aggregate_rows, delta_report, parse_csv, rows_to_csv, rows_to_text, AggregateRow, CellKey,
    MetricsReport,
};
use crate::harness::config::Experiment;
use crate::harness::hash::content_hash;
use crate::harness::layout::{
    alpha_label, ensure_dir, write_atomic, Layout, MANIFEST_FILE, MASK_FILE, METRICS_FILE,
    MODEL_FILE,
};
use crate::harness::manifest::Manifest;
use crate::harness::run::{
    evaluate_model, prepare_data, run_over, split_for_seed, train_original, ExperimentData,
    MaskCache, MetricsFile,
};
use crate::nn::checkpoint;
use crate::nn::Model;
use crate::unlearning::{retrain_oracle, run_algorithm};

/// Shared command-line flags.
#[derive(Debug, Clone, Copy)]
pub struct RunFlags {
    pub workers: usize,
    pub dry_run: bool,
    pub resume: bool,
}

impl Default for RunFlags {
    fn default() -> Self {
        RunFlags {
            workers: 1,
            dry_run: false,
            resume: false,
        }
    }
}

/// One (strategy, alpha, algorithm) cell of the run matrix.
#[derive(Debug, Clone)]
pub struct Cell {
    pub strategy_idx: usize,
    pub alpha: Option<f64>,
    pub alpha_label: String,
    pub algorithm_idx: usize,
}

/// Expand the full run matrix in config order.
pub fn enumerate_cells(exp: &Experiment) -> Vec<Cell> {
    let mut cells = Vec::new();
    for (si, strategy) in exp.strategies.iter().enumerate() {
        for alpha in crate::harness::run::strategy_alphas(exp, strategy) {
            for ai in 0..exp.algorithms.len() {
                cells.push(Cell {
                    strategy_idx: si,
                    alpha,
                    alpha_label: alpha_label(alpha),
                    algorithm_idx: ai,
                });
            }
        }
    }
    cells
}

fn matrix_lines(exp: &Experiment, cells: &[Cell]) -> Vec<String> {
    let mut lines = Vec::new();
    for cell in cells {
        for &seed in &exp.seeds {
            lines.push(format!(
                "strategy={} algorithm={} alpha={} seed={}",
                exp.strategies[cell.strategy_idx].id,
                exp.algorithms[cell.algorithm_idx].algorithm.name(),
                cell.alpha_label,
                seed
            ));
        }
    }
    lines
}

fn load_original(layout: &Layout, seed: u64) -> Result<Model> {
    let path = layout.original_dir(seed).join(MODEL_FILE);
    if !path.exists() {
        return Err(Error::Validation(format!(
            "missing original checkpoint for seed {seed} at {}; run the train command first",
            path.display()
        )));
    }
    checkpoint::load(&path)
}

/// Train the original model for every seed and persist checkpoints.
pub fn cmd_train(exp: &Experiment, flags: RunFlags) -> Result<Vec<String>> {
    let data = prepare_data(exp)?;
    let layout = Layout::new(&exp.output_root, &exp.config_hash);
    let lines: Vec<String> = exp
        .seeds
        .iter()
        .map(|s| format!("train original seed={s}"))
        .collect();
    if flags.dry_run {
        return Ok(lines);
    }
    run_over(exp.seeds.clone(), flags.workers, |seed| {
        train_one_original(exp, &data, &layout, seed, flags.resume)
    })?;
    Ok(lines)
}

fn train_one_original(
    exp: &Experiment,
    data: &ExperimentData,
    layout: &Layout,
    seed: u64,
    resume: bool,
) -> Result<()> {
    let dir = layout.original_dir(seed);
    if resume && dir.join(MANIFEST_FILE).exists() {
        return Ok(());
    }
    ensure_dir(&dir)?;
    let start = Instant::now();
    let (model, result) = train_original(exp, &data.train, seed)?;
    checkpoint::save(&model, &dir.join(MODEL_FILE))?;
    let mut manifest = Manifest::new("original", &exp.config_hash, seed);
    manifest.steps_taken = Some(result.steps_taken);
    manifest
        .input_hashes
        .push(format!("{:016x}", data.train.checksum));
    manifest.artifacts.push(MODEL_FILE.into());
    manifest
        .wall_ms
        .insert("train".into(), start.elapsed().as_millis() as u64);
    manifest.save(&dir.join(MANIFEST_FILE))
}

/// Run the (strategy, alpha, algorithm, seed) matrix against saved original
/// checkpoints. Returns the matrix lines (printed by the CLI on --dry-run).
pub fn cmd_unlearn(exp: &Experiment, flags: RunFlags) -> Result<Vec<String>> {
    let cells = enumerate_cells(exp);
    let lines = matrix_lines(exp, &cells);
    if flags.dry_run {
        return Ok(lines);
    }
    let data = prepare_data(exp)?;
    let layout = Layout::new(&exp.output_root, &exp.config_hash);
    run_over(exp.seeds.clone(), flags.workers, |seed| {
        unlearn_one_seed(exp, &data, &layout, &cells, seed, None, flags.resume)
    })?;
    Ok(lines)
}

/// Unlearn every cell for one seed. `lr_overrides` (from the sweep's
/// selection phase) replaces each cell's configured learning rate.
fn unlearn_one_seed(
    exp: &Experiment,
    data: &ExperimentData,
    layout: &Layout,
    cells: &[Cell],
    seed: u64,
    lr_overrides: Option<&[f64]>,
    resume: bool,
) -> Result<()> {
    let original = load_original(layout, seed)?;
    let original_hash = content_hash(&checkpoint::to_bytes(&original));
    let split = split_for_seed(exp, &data.train, seed)?;
    let mut masks = MaskCache::new(exp, &original, data, &split, seed);
    for (ci, cell) in cells.iter().enumerate() {
        let strategy = &exp.strategies[cell.strategy_idx];
        let algorithm = &exp.algorithms[cell.algorithm_idx];
        let dir = layout.cell_dir(
            &strategy.id,
            algorithm.algorithm.name(),
            &cell.alpha_label,
            seed,
        );
        if resume && dir.join(MANIFEST_FILE).exists() {
            continue;
        }
        ensure_dir(&dir)?;
        let start = Instant::now();
        let mask = masks.get(strategy, cell.alpha)?;
        let mask_ms = start.elapsed().as_millis() as u64;

        let lr = lr_overrides.map_or(algorithm.lr, |o| o[ci]);
        let cfg = algorithm.unlearn_config(lr, seed);
        let retain = split.retain_view(&data.train);
        let forget = split.forget_view(&data.train);
        let run_start = Instant::now();
        let outcome = run_algorithm(&original, Some(&mask), &retain, &forget, &cfg)?;

        checkpoint::save(&outcome.model, &dir.join(MODEL_FILE))?;
        mask.save(&dir.join(MASK_FILE))?;
        let mut manifest = Manifest::new("unlearn", &exp.config_hash, seed);
        manifest.strategy = Some(strategy.id.clone());
        manifest.algorithm = Some(algorithm.algorithm.name().into());
        manifest.alpha = Some(cell.alpha_label.clone());
        manifest.chosen_lr = Some(lr);
        manifest.steps_taken = Some(outcome.steps_taken);
        manifest.input_hashes.push(original_hash.clone());
        manifest.artifacts.push(MODEL_FILE.into());
        manifest.artifacts.push(MASK_FILE.into());
        // metrics land here when the evaluate stage runs
        manifest.artifacts.push(METRICS_FILE.into());
        manifest.wall_ms.insert("mask".into(), mask_ms);
        manifest
            .wall_ms
            .insert("unlearn".into(), run_start.elapsed().as_millis() as u64);
        manifest.save(&dir.join(MANIFEST_FILE))?;
    }
    Ok(())
}

/// Load or train the retrain oracle for one seed, evaluate it, and verify
/// the self-consistency property (evaluating the same checkpoint twice gives
/// exactly zero deltas).
fn oracle_for_seed(
    exp: &Experiment,
    data: &ExperimentData,
    layout: &Layout,
    seed: u64,
    resume: bool,
) -> Result<MetricsReport> {
    let dir = layout.oracle_dir(seed);
    let ckpt = dir.join(MODEL_FILE);
    let split = split_for_seed(exp, &data.train, seed)?;
    let model = if ckpt.exists() {
        checkpoint::load(&ckpt)?
    } else if resume {
        return Err(Error::Validation(format!(
            "missing oracle checkpoint for seed {seed} at {}; run evaluate without --resume to train it",
            ckpt.display()
        )));
    } else {
        ensure_dir(&dir)?;
        let start = Instant::now();
        let retain = split.retain_view(&data.train);
        let outcome = retrain_oracle(&retain, &exp.arch, &exp.oracle_recipe, seed)?;
        checkpoint::save(&outcome.model, &ckpt)?;
        let mut manifest = Manifest::new("oracle", &exp.config_hash, seed);
        manifest.steps_taken = Some(outcome.steps_taken);
        manifest
            .input_hashes
            .push(format!("{:016x}", data.train.checksum));
        manifest.artifacts.push(MODEL_FILE.into());
        manifest
            .wall_ms
            .insert("oracle_train".into(), start.elapsed().as_millis() as u64);
        manifest.save(&dir.join(MANIFEST_FILE))?;
        outcome.model
    };
    let run_id = format!("oracle/seed_{seed}");
    let report = evaluate_model(&model, data, &split, seed, &run_id)?;
    // self-consistency: a second evaluation of the same checkpoint must be
    // identical, i.e. the oracle's delta against itself is exactly zero
    let again = evaluate_model(&model, data, &split, seed, &run_id)?;
    let self_delta = delta_report(std::slice::from_ref(&report), &[again])?;
    for (name, stats) in self_delta.metrics() {
        if stats.mean != 0.0 {
            return Err(Error::Validation(format!(
                "oracle self-evaluation for seed {seed} moved {name} by {}",
                stats.mean
            )));
        }
    }
    MetricsFile::from_report(&report).save(&dir.join(METRICS_FILE))?;
    Ok(report)
}

/// Evaluate every unlearned checkpoint against the per-seed oracle and emit
/// the summary table. Returns the aggregate rows.
pub fn cmd_evaluate(exp: &Experiment, flags: RunFlags) -> Result<Vec<AggregateRow>> {
    let data = prepare_data(exp)?;
    let layout = Layout::new(&exp.output_root, &exp.config_hash);
    let cells = enumerate_cells(exp);

    let per_seed = run_over(exp.seeds.clone(), flags.workers, |seed| {
        evaluate_one_seed(exp, &data, &layout, &cells, seed, flags.resume)
    })?;

    let rows = summarize(exp, &cells, &per_seed)?;
    write_atomic(&layout.summary_csv(), rows_to_csv(&rows).as_bytes())?;
    write_atomic(&layout.summary_text(), rows_to_text(&rows).as_bytes())?;
    Ok(rows)
}

type SeedReports = (MetricsReport, Vec<MetricsReport>);

fn evaluate_one_seed(
    exp: &Experiment,
    data: &ExperimentData,
    layout: &Layout,
    cells: &[Cell],
    seed: u64,
    resume: bool,
) -> Result<SeedReports> {
    let oracle_report = oracle_for_seed(exp, data, layout, seed, resume)?;
    let split = split_for_seed(exp, &data.train, seed)?;
    let mut cell_reports = Vec::with_capacity(cells.len());
    for cell in cells {
        let strategy = &exp.strategies[cell.strategy_idx];
        let algorithm = &exp.algorithms[cell.algorithm_idx];
        let dir = layout.cell_dir(
            &strategy.id,
            algorithm.algorithm.name(),
            &cell.alpha_label,
            seed,
        );
        let metrics_path = dir.join(METRICS_FILE);
        if resume && metrics_path.exists() {
            cell_reports.push(MetricsFile::load(&metrics_path)?.to_report());
            continue;
        }
        let ckpt = dir.join(MODEL_FILE);
        if !ckpt.exists() {
            return Err(Error::Validation(format!(
                "missing unlearned checkpoint for strategy={} algorithm={} alpha={} seed={seed}; run the unlearn command first",
                strategy.id,
                algorithm.algorithm.name(),
                cell.alpha_label
            )));
        }
        let model = checkpoint::load(&ckpt)?;
        let run_id = format!(
            "{}/{}/alpha_{}/seed_{seed}",
            strategy.id,
            algorithm.algorithm.name(),
            cell.alpha_label
        );
        let report = evaluate_model(&model, data, &split, seed, &run_id)?;
        MetricsFile::from_report(&report).save(&metrics_path)?;
        cell_reports.push(report);
    }
    Ok((oracle_report, cell_reports))
}

/// Collapse per-seed reports into sorted aggregate rows.
fn summarize(
    exp: &Experiment,
    cells: &[Cell],
    per_seed: &[SeedReports],
) -> Result<Vec<AggregateRow>> {
    let oracle_reports: Vec<MetricsReport> =
        per_seed.iter().map(|(o, _)| o.clone()).collect();
    let mut keyed = Vec::with_capacity(cells.len());
    for (ci, cell) in cells.iter().enumerate() {
        let unlearned: Vec<MetricsReport> = per_seed
            .iter()
            .map(|(_, cell_reports)| cell_reports[ci].clone())
            .collect();
        let report = delta_report(&oracle_reports, &unlearned)?;
        keyed.push((
            CellKey {
                strategy: exp.strategies[cell.strategy_idx].id.clone(),
                algorithm: exp.algorithms[cell.algorithm_idx].algorithm.name().into(),
                alpha: cell.alpha.unwrap_or(0.0),
            },
            report,
        ));
    }
    Ok(aggregate_rows(&keyed))
}

/// Budget sweep: select a learning rate per cell on the held-out validation
/// seed (objective: |delta_forget| + |delta_test|), then run and evaluate the
/// full matrix with the chosen rates. Emits summary and per-alpha curves.
pub fn cmd_sweep(exp: &Experiment, flags: RunFlags) -> Result<Vec<AggregateRow>> {
    let cells = enumerate_cells(exp);
    if flags.dry_run {
        return Ok(Vec::new());
    }
    let data = prepare_data(exp)?;
    let layout = Layout::new(&exp.output_root, &exp.config_hash);

    // stage 1: originals for every seed (resume-aware)
    run_over(exp.seeds.clone(), flags.workers, |seed| {
        train_one_original(exp, &data, &layout, seed, flags.resume)
    })?;

    // stage 2: learning-rate selection on the validation seed
    let needs_selection = cells.iter().any(|c| {
        exp.algorithms[c.algorithm_idx].lr_candidates.len() > 1
    });
    let chosen_lrs: Vec<f64> = if needs_selection {
        train_one_original(exp, &data, &layout, exp.validation_seed, true)?;
        let val_oracle = oracle_for_seed(exp, &data, &layout, exp.validation_seed, false)?;
        select_rates(exp, &data, &layout, &cells, &val_oracle)?
    } else {
        cells
            .iter()
            .map(|c| exp.algorithms[c.algorithm_idx].lr)
            .collect()
    };

    // stage 3: unlearn the matrix with chosen rates
    run_over(exp.seeds.clone(), flags.workers, |seed| {
        unlearn_one_seed(exp, &data, &layout, &cells, seed, Some(&chosen_lrs), flags.resume)
    })?;

    // stage 4: evaluate and emit tables
    let per_seed = run_over(exp.seeds.clone(), flags.workers, |seed| {
        evaluate_one_seed(exp, &data, &layout, &cells, seed, flags.resume)
    })?;
    let rows = summarize(exp, &cells, &per_seed)?;
    write_atomic(&layout.summary_csv(), rows_to_csv(&rows).as_bytes())?;
    write_atomic(&layout.summary_text(), rows_to_text(&rows).as_bytes())?;

    let curves = sweep_curves(exp, &cells, &chosen_lrs, &rows);
    write_atomic(&layout.sweep_curves_csv(), curves.as_bytes())?;
    Ok(rows)
}

/// Pick each cell's learning rate by running its candidates on the
/// validation seed and minimizing |delta_forget| + |delta_test|; ties keep
/// the earliest candidate.
fn select_rates(
    exp: &Experiment,
    data: &ExperimentData,
    layout: &Layout,
    cells: &[Cell],
    val_oracle: &MetricsReport,
) -> Result<Vec<f64>> {
    let seed = exp.validation_seed;
    let original = load_original(layout, seed)?;
    let split = split_for_seed(exp, &data.train, seed)?;
    let mut masks = MaskCache::new(exp, &original, data, &split, seed);
    let retain = split.retain_view(&data.train);
    let forget = split.forget_view(&data.train);

    let mut chosen = Vec::with_capacity(cells.len());
    for cell in cells {
        let strategy = &exp.strategies[cell.strategy_idx];
        let algorithm = &exp.algorithms[cell.algorithm_idx];
        let candidates = &algorithm.lr_candidates;
        if candidates.len() == 1 {
            chosen.push(candidates[0]);
            continue;
        }
        let mask = masks.get(strategy, cell.alpha)?;
        let mut best: Option<(f64, f64)> = None; // (objective, lr)
        for &lr in candidates {
            let cfg = algorithm.unlearn_config(lr, seed);
            let outcome = run_algorithm(&original, Some(&mask), &retain, &forget, &cfg)?;
            let run_id = format!(
                "trial/{}/{}/alpha_{}/lr_{lr}/seed_{seed}",
                strategy.id,
                algorithm.algorithm.name(),
                cell.alpha_label
            );
            let report = evaluate_model(&outcome.model, data, &split, seed, &run_id)?;
            let objective = (100.0 * (val_oracle.forget_acc - report.forget_acc)).abs()
                + (100.0 * (val_oracle.test_acc - report.test_acc)).abs();
            let dir = layout.trial_dir(
                &strategy.id,
                algorithm.algorithm.name(),
                &cell.alpha_label,
                lr,
                seed,
            );
            ensure_dir(&dir)?;
            MetricsFile::from_report(&report).save(&dir.join(METRICS_FILE))?;
            if best.is_none_or(|(obj, _)| objective < obj) {
                best = Some((objective, lr));
            }
        }
        chosen.push(best.expect("at least one candidate").1);
    }
    Ok(chosen)
}

/// Per-alpha metric curves, sorted by alpha ascending; stable across reruns.
fn sweep_curves(exp: &Experiment, cells: &[Cell], chosen_lrs: &[f64], rows: &[AggregateRow]) -> String {
    use std::fmt::Write as _;
    let mut lines: Vec<(f64, String)> = Vec::new();
    for (cell, &lr) in cells.iter().zip(chosen_lrs) {
        let strategy = &exp.strategies[cell.strategy_idx].id;
        let algorithm = exp.algorithms[cell.algorithm_idx].algorithm.name();
        let alpha = cell.alpha.unwrap_or(0.0);
        for row in rows.iter().filter(|r| {
            &r.strategy == strategy && r.algorithm == algorithm && r.alpha == alpha
        }) {
            let ci = row
                .ci95
                .map_or("n/a".to_string(), |v| format!("{v:.6}"));
            lines.push((
                alpha,
                format!(
                    "{alpha},{strategy},{algorithm},{lr},{},{:.6},{ci},{}",
                    row.metric, row.mean, row.n
                ),
            ));
        }
    }
    lines.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut out = String::from("alpha,strategy,algorithm,chosen_lr,metric,mean,ci95,n\n");
    for (_, line) in lines {
        let _ = writeln!(out, "{line}");
    }
    out
}

/// Diff two summary CSVs row by row. Returns a human-readable report.
pub fn cmd_compare(a_path: &Path, b_path: &Path) -> Result<String> {
    use std::fmt::Write as _;
    let read = |p: &Path| -> Result<Vec<AggregateRow>> {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        parse_csv(&text)
    };
    let a = read(a_path)?;
    let b = read(b_path)?;
    let key =
        |r: &AggregateRow| (r.strategy.clone(), r.algorithm.clone(), format!("{}", r.alpha), r.metric.clone());
    let mut out = String::new();
    let b_map: std::collections::BTreeMap<_, &AggregateRow> =
        b.iter().map(|r| (key(r), r)).collect();
    let mut a_keys = std::collections::BTreeSet::new();
    let mut identical = true;
    for row in &a {
        let k = key(row);
        a_keys.insert(k.clone());
        match b_map.get(&k) {
            Some(other) => {
                let diff = other.mean - row.mean;
                if diff.abs() > 1e-12 {
                    identical = false;
                    let _ = writeln!(
                        out,
                        "{}/{}/alpha={}/{}: {:.6} -> {:.6} (diff {:+.6})",
                        k.0, k.1, k.2, k.3, row.mean, other.mean, diff
                    );
                }
            }
            None => {
                identical = false;
                let _ = writeln!(out, "only in {}: {}/{}/alpha={}/{}", a_path.display(), k.0, k.1, k.2, k.3);
            }
        }
    }
    for row in &b {
        if !a_keys.contains(&key(row)) {
            identical = false;
            let k = key(row);
            let _ = writeln!(out, "only in {}: {}/{}/alpha={}/{}", b_path.display(), k.0, k.1, k.2, k.3);
        }
    }
    if identical {
        out.push_str("summaries are identical\n");
    }
    Ok(out)
}
