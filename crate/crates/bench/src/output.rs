//! CSV artifacts of an experiment.
//!
//! * `runs.csv`: `seed,arm,sample_index,amari_index`, every `stride`-th sample of each run.
//! * `summary.csv`: `arm,mean_iters,stddev,ci95_lo,ci95_hi,converged,diverged,improvement_vs_arm0`.
//! * `outcomes.csv`: `seed,arm,iterations_to_convergence,diverged`, one row per run.
//!
//! Numbers use Rust's shortest round-trip formatting; undefined values are empty fields.

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::experiment::{ComparisonSummary, RunOutcome};

pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const OUTCOMES_FILE: &str = "outcomes.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub seed: u64,
    pub arm: String,
    pub sample_index: usize,
    pub amari_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub arm: String,
    pub mean_iters: Option<f64>,
    pub stddev: Option<f64>,
    pub ci95_lo: Option<f64>,
    pub ci95_hi: Option<f64>,
    pub converged: usize,
    pub diverged: usize,
    pub improvement_vs_arm0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub seed: u64,
    pub arm: String,
    pub iterations_to_convergence: Option<usize>,
    pub diverged: bool,
}

fn writer(path: &Path) -> anyhow::Result<csv::Writer<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(file))
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.serialize(row).with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn summary_rows(summary: &ComparisonSummary) -> Vec<SummaryRow> {
    summary
        .arms
        .iter()
        .map(|a| SummaryRow {
            arm: a.arm.clone(),
            mean_iters: a.mean_iters,
            stddev: a.stddev,
            ci95_lo: a.ci95.map(|c| c.0),
            ci95_hi: a.ci95.map(|c| c.1),
            converged: a.converged,
            diverged: a.diverged,
            improvement_vs_arm0: a.improvement_vs_arm0,
        })
        .collect()
}

/// Writes the three CSV files into `dir` (created if missing) and returns their paths.
pub fn emit_csv(
    labels: &[String],
    outcomes: &[RunOutcome],
    summary: &ComparisonSummary,
    stride: usize,
    dir: &Path,
) -> anyhow::Result<Vec<PathBuf>> {
    assert!(stride >= 1, "stride must be at least 1");
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let runs = dir.join(RUNS_FILE);
    write_rows(
        &runs,
        &["seed", "arm", "sample_index", "amari_index"],
        outcomes.iter().flat_map(|o| {
            o.record.amari.iter().enumerate().step_by(stride).map(move |(t, &v)| RunRow {
                seed: o.seed,
                arm: labels[o.arm].clone(),
                sample_index: t,
                amari_index: v,
            })
        }),
    )?;

    let summary_path = dir.join(SUMMARY_FILE);
    write_rows(
        &summary_path,
        &["arm", "mean_iters", "stddev", "ci95_lo", "ci95_hi", "converged", "diverged", "improvement_vs_arm0"],
        summary_rows(summary),
    )?;

    let outcomes_path = dir.join(OUTCOMES_FILE);
    write_rows(
        &outcomes_path,
        &["seed", "arm", "iterations_to_convergence", "diverged"],
        outcomes.iter().map(|o| OutcomeRow {
            seed: o.seed,
            arm: labels[o.arm].clone(),
            iterations_to_convergence: o.record.iterations_to_convergence,
            diverged: o.record.diverged,
        }),
    )?;

    Ok(vec![runs, summary_path, outcomes_path])
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    reader.deserialize().collect::<Result<Vec<T>, _>>().with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::summarize;
    use easi::RunRecord;

    #[test]
    fn empty_records_give_header_only_files() {
        let dir = tempfile::tempdir().unwrap();
        let summary = summarize(&[], &[]);
        let paths = emit_csv(&[], &[], &summary, 1, dir.path()).unwrap();
        let contents: Vec<String> = paths.iter().map(|p| std::fs::read_to_string(p).unwrap()).collect();
        assert_eq!(contents[0], "seed,arm,sample_index,amari_index\n");
        assert_eq!(contents[1], "arm,mean_iters,stddev,ci95_lo,ci95_hi,converged,diverged,improvement_vs_arm0\n");
        assert_eq!(contents[2], "seed,arm,iterations_to_convergence,diverged\n");
    }

    #[test]
    fn rows_are_strided_and_options_blank() {
        let dir = tempfile::tempdir().unwrap();
        let labels = vec!["sgd".to_string()];
        let outcomes = vec![RunOutcome {
            seed: 4,
            arm: 0,
            record: RunRecord {
                amari: vec![0.5, 0.25, 0.125, 0.0625, 0.03125],
                iterations_to_convergence: None,
                diverged: false,
            },
        }];
        let summary = summarize(&labels, &outcomes);
        emit_csv(&labels, &outcomes, &summary, 2, dir.path()).unwrap();

        let runs = std::fs::read_to_string(dir.path().join(RUNS_FILE)).unwrap();
        assert_eq!(runs, "seed,arm,sample_index,amari_index\n4,sgd,0,0.5\n4,sgd,2,0.125\n4,sgd,4,0.03125\n");
        let summary = std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
        assert_eq!(summary.lines().nth(1).unwrap(), "sgd,,,,,0,0,");
        let parsed: Vec<SummaryRow> = read_csv(&dir.path().join(SUMMARY_FILE)).unwrap();
        assert_eq!(parsed[0].mean_iters, None);
    }

    #[test]
    fn unwritable_directory_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = emit_csv(&[], &[], &summarize(&[], &[]), 1, &blocker.join("sub")).unwrap_err();
        assert!(format!("{err:#}").contains("file"));
    }
}
