//! Cross-run aggregation into summary tables.

use std::fmt::Write as _;

use crate::evaluation::delta::DeltaReport;

/// Identity of one experiment cell.
#[derive(Debug, Clone, PartialEq, PartialOrd)]
pub struct CellKey {
    pub strategy: String,
    pub algorithm: String,
    pub alpha: f64,
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub strategy: String,
    pub algorithm: String,
    pub alpha: f64,
    pub metric: String,
    pub mean: f64,
    pub ci95: Option<f64>,
    pub n: usize,
}

/// Flatten delta reports into sorted rows: one row per (cell, metric).
/// Input order does not matter; the output is fully sorted so repeated runs
/// emit identical tables.
pub fn aggregate_rows(cells: &[(CellKey, DeltaReport)]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for (key, report) in cells {
        for (metric, stats) in report.metrics() {
            rows.push(AggregateRow {
                strategy: key.strategy.clone(),
                algorithm: key.algorithm.clone(),
                alpha: key.alpha,
                metric: metric.to_string(),
                mean: stats.mean,
                ci95: stats.ci95,
                n: report.n,
            });
        }
    }
    rows.sort_by(|a, b| {
        a.strategy
            .cmp(&b.strategy)
            .then(a.algorithm.cmp(&b.algorithm))
            .then(a.alpha.partial_cmp(&b.alpha).expect("finite alpha"))
            .then(a.metric.cmp(&b.metric))
    });
    rows
}

/// Render rows as CSV with a fixed six-decimal format.
pub fn rows_to_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("strategy,algorithm,alpha,metric,mean,ci95,n\n");
    for r in rows {
        let ci = match r.ci95 {
            Some(v) => format!("{v:.6}"),
            None => "n/a".to_string(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{},{}",
            r.strategy, r.algorithm, r.alpha, r.metric, r.mean, ci, r.n
        );
    }
    out
}

/// Render rows as an aligned text table for terminals.
pub fn rows_to_text(rows: &[AggregateRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:<14} {:>6} {:<22} {:>12} {:>12} {:>3}",
        "strategy", "algorithm", "alpha", "metric", "mean", "ci95", "n"
    );
    for r in rows {
        let ci = match r.ci95 {
            Some(v) => format!("{v:.4}"),
            None => "n/a".to_string(),
        };
        let _ = writeln!(
            out,
            "{:<24} {:<14} {:>6} {:<22} {:>12.4} {:>12} {:>3}",
            r.strategy, r.algorithm, r.alpha, r.metric, r.mean, ci, r.n
        );
    }
    out
}

/// Parse a summary CSV back into rows (used by the compare command).
pub fn parse_csv(text: &str) -> crate::error::Result<Vec<AggregateRow>> {
    use crate::error::Error;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                path: "summary.csv".into(),
                offset: 0,
                message: format!("line {} has {} fields, expected 7", i + 1, fields.len()),
            });
        }
        let parse_f64 = |s: &str| -> crate::error::Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse {
                path: "summary.csv".into(),
                offset: 0,
                message: format!("'{s}' is not a number on line {}", i + 1),
            })
        };
        rows.push(AggregateRow {
            strategy: fields[0].to_string(),
            algorithm: fields[1].to_string(),
            alpha: parse_f64(fields[2])?,
            metric: fields[3].to_string(),
            mean: parse_f64(fields[4])?,
            ci95: if fields[5] == "n/a" {
                None
            } else {
                Some(parse_f64(fields[5])?)
            },
            n: fields[6].parse().map_err(|_| Error::Parse {
                path: "summary.csv".into(),
                offset: 0,
                message: format!("bad n on line {}", i + 1),
            })?,
        });
    }
    Ok(rows)
}
