//! Side-by-side reproduction of the published clock/throughput table for `m = 4`, `n = 2`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use easi::pipeline::round2;
use easi::{speedup_report, throughput, PipelineMode, PipelineSpec};
use serde::Serialize;

pub const PUBLISHED_M: usize = 4;
pub const PUBLISHED_N: usize = 2;
pub const PUBLISHED_SGD_CLOCK_MHZ: f64 = 4.81;
pub const PUBLISHED_SMBGD_CLOCK_MHZ: f64 = 55.17;
pub const PUBLISHED_SGD_MIPS: f64 = 4.81;
pub const PUBLISHED_SMBGD_MIPS: f64 = 717.21;
pub const PUBLISHED_CLOCK_SPEEDUP: f64 = 11.46;
pub const PUBLISHED_THROUGHPUT_SPEEDUP: f64 = 149.11;

/// Half of the last printed digit of the published clocks.
const CLOCK_HALF_ULP: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Match,
    /// Off by one in the last published digit, within the ±0.01 tolerance.
    Rounding,
    Mismatch,
    /// No published counterpart (e.g. after a clock override).
    NoReference,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub quantity: String,
    pub reproduced: f64,
    pub published: Option<f64>,
    pub flag: Flag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1 {
    pub smbgd_clock_mhz: f64,
    pub rows: Vec<Table1Row>,
}

fn hundredths(v: f64) -> i64 {
    (v * 100.0).round() as i64
}

fn compare(reproduced: f64, published: Option<f64>) -> Flag {
    let Some(p) = published else { return Flag::NoReference };
    match (hundredths(reproduced) - hundredths(p)).abs() {
        0 => Flag::Match,
        1 => Flag::Rounding,
        _ => Flag::Mismatch,
    }
}

/// Range of the clock ratio consistent with both published clocks having been rounded to
/// two decimals.
pub fn clock_ratio_rounding_range() -> (f64, f64) {
    (
        (PUBLISHED_SMBGD_CLOCK_MHZ - CLOCK_HALF_ULP) / (PUBLISHED_SGD_CLOCK_MHZ + CLOCK_HALF_ULP),
        (PUBLISHED_SMBGD_CLOCK_MHZ + CLOCK_HALF_ULP) / (PUBLISHED_SGD_CLOCK_MHZ - CLOCK_HALF_ULP),
    )
}

/// Builds the table; `clock_override` replaces the SMBGD design clock, which removes the
/// published reference from every row that depends on it.
pub fn table1_report(clock_override: Option<f64>) -> anyhow::Result<Table1> {
    let smbgd_clock = clock_override.unwrap_or(PUBLISHED_SMBGD_CLOCK_MHZ);
    let published = clock_override.is_none();
    let reference = |v: f64| published.then_some(v);

    let sgd = PipelineSpec::new(PUBLISHED_M, PUBLISHED_N, PUBLISHED_SGD_CLOCK_MHZ, PipelineMode::SgdMultiCycle)?;
    let smbgd = PipelineSpec::new(PUBLISHED_M, PUBLISHED_N, smbgd_clock, PipelineMode::SmbgdPipelined)?;
    let stalled = PipelineSpec { mode: PipelineMode::SgdPipelinedStalled, ..smbgd };

    let sgd_report = throughput(&sgd)?;
    let report = speedup_report(&sgd, &smbgd)?;
    let stalled_report = throughput(&stalled)?;

    let mut rows = Vec::new();
    let mut push = |quantity: &str, reproduced: f64, published: Option<f64>| {
        rows.push(Table1Row {
            quantity: quantity.to_string(),
            reproduced,
            published,
            flag: compare(reproduced, published),
        });
    };
    push("pipeline_stages", f64::from(report.stages), None);
    push("sgd_clock_mhz", PUBLISHED_SGD_CLOCK_MHZ, Some(PUBLISHED_SGD_CLOCK_MHZ));
    push("smbgd_clock_mhz", smbgd_clock, reference(PUBLISHED_SMBGD_CLOCK_MHZ));
    push("sgd_throughput_mips", sgd_report.throughput_mips, Some(PUBLISHED_SGD_MIPS));
    push("smbgd_throughput_mips", report.throughput_mips, reference(PUBLISHED_SMBGD_MIPS));
    push("smbgd_completion_rate_msps", report.completion_rate_msps, None);
    push("stalled_sgd_throughput_mips", stalled_report.throughput_mips, None);
    push("clock_speedup", report.clock_speedup, reference(PUBLISHED_CLOCK_SPEEDUP));
    push("throughput_speedup", report.throughput_speedup, reference(PUBLISHED_THROUGHPUT_SPEEDUP));

    Ok(Table1 { smbgd_clock_mhz: smbgd_clock, rows })
}

impl Table1 {
    pub fn row(&self, quantity: &str) -> Option<&Table1Row> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "EASI pipeline model, m = {PUBLISHED_M}, n = {PUBLISHED_N}, SMBGD clock {:.2} MHz",
            self.smbgd_clock_mhz
        );
        let _ = writeln!(out, "{:<30} {:>12} {:>12}  flag", "quantity", "reproduced", "published");
        for r in &self.rows {
            let published = r.published.map_or_else(|| "-".to_string(), |p| format!("{p:.2}"));
            let flag = match r.flag {
                Flag::Match => "ok",
                Flag::Rounding => "ok (rounding of published clocks)",
                Flag::Mismatch => "MISMATCH",
                Flag::NoReference => "",
            };
            let _ = writeln!(out, "{:<30} {:>12.2} {:>12}  {flag}", r.quantity, round2(r.reproduced), published);
        }
        out
    }

    pub fn has_mismatch(&self) -> bool {
        self.rows.iter().any(|r| r.flag == Flag::Mismatch)
    }

    pub fn write_csv(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("table1.csv");
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        for r in &self.rows {
            w.serialize(r).with_context(|| format!("writing {}", path.display()))?;
        }
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_reproduces_published_rows() {
        let t = table1_report(None).unwrap();
        let tp = t.row("smbgd_throughput_mips").unwrap();
        assert_eq!(round2(tp.reproduced), 717.21);
        assert_eq!(tp.flag, Flag::Match);
        assert_eq!(t.row("pipeline_stages").unwrap().reproduced, 13.0);
        assert_eq!(round2(t.row("throughput_speedup").unwrap().reproduced), 149.11);
        assert_eq!(t.row("throughput_speedup").unwrap().flag, Flag::Match);

        let clock = t.row("clock_speedup").unwrap();
        assert_eq!(round2(clock.reproduced), 11.47);
        assert_eq!(clock.published, Some(11.46));
        assert_eq!(clock.flag, Flag::Rounding);
        let (lo, hi) = clock_ratio_rounding_range();
        assert!(lo <= 11.46 && 11.46 <= hi);
        assert!(!t.has_mismatch());
    }

    #[test]
    fn clock_override_drops_references() {
        let t = table1_report(Some(100.0)).unwrap();
        let tp = t.row("smbgd_throughput_mips").unwrap();
        assert_eq!(round2(tp.reproduced), 1300.0);
        assert_eq!(tp.published, None);
        assert_eq!(tp.flag, Flag::NoReference);
        assert!(t.render_text().contains("1300.00"));
    }

    #[test]
    fn flags() {
        assert_eq!(compare(1.0, Some(1.0)), Flag::Match);
        assert_eq!(compare(1.0, Some(1.5)), Flag::Mismatch);
        assert_eq!(compare(1.0, Some(1.02)), Flag::Mismatch);
        assert_eq!(compare(2.0, None), Flag::NoReference);
        assert_eq!(compare(11.47, Some(11.46)), Flag::Rounding);
    }

    #[test]
    fn text_and_csv() {
        let t = table1_report(None).unwrap();
        let text = t.render_text();
        assert!(text.contains("717.21"));
        assert!(text.contains("rounding"));
        let dir = tempfile::tempdir().unwrap();
        let path = t.write_csv(dir.path()).unwrap();
        let csv = std::fs::read_to_string(path).unwrap();
        assert!(csv.starts_with("quantity,reproduced,published,flag\n"));
        assert!(csv.contains("clock_speedup,"));
    }
}
