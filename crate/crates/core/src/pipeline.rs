//! Analytical throughput model of the pipelined EASI datapath.
//!
//! The pipeline has a fixed 10-stage body plus a reduction tree whose depth grows with
//! `log₂(m·n)`. Throughput is expressed in MIPS (million iterations per second) using the
//! in-flight accounting of the published results table: a full SMBGD pipeline counts every
//! occupied stage as one iteration per clock. The plain completion rate (finished samples
//! per microsecond) is reported separately.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stages that do not depend on problem size.
pub const FIXED_STAGES: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    /// Unpipelined SGD datapath: one iteration per (slow) clock.
    SgdMultiCycle,
    /// Pipelined SGD that drains the pipeline before every separator update.
    SgdPipelinedStalled,
    /// Pipelined SMBGD, one new sample per clock.
    SmbgdPipelined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub m: usize,
    pub n: usize,
    pub clock_mhz: f64,
    pub mode: PipelineMode,
}

impl PipelineSpec {
    pub fn new(m: usize, n: usize, clock_mhz: f64, mode: PipelineMode) -> Result<Self> {
        let spec = Self { m, n, clock_mhz, mode };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        stage_count(self.m, self.n)?;
        if !(self.clock_mhz.is_finite() && self.clock_mhz > 0.0) {
            return Err(Error::InvalidHyperparameter { name: "clock_mhz", reason: "must be finite and > 0".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub stages: u32,
    /// In-flight accounting, as in the published table.
    pub throughput_mips: f64,
    /// Completed samples per microsecond.
    pub completion_rate_msps: f64,
    /// Clock ratio against the baseline (1 for a standalone report).
    pub clock_speedup: f64,
    /// Throughput ratio against the baseline (1 for a standalone report).
    pub throughput_speedup: f64,
}

/// `10 + ⌈log₂(m·n)⌉`.
pub fn stage_count(m: usize, n: usize) -> Result<u32> {
    if n == 0 || m < n {
        return Err(Error::InvalidDimensions(format!("pipeline needs m >= n >= 1, got m={m}, n={n}")));
    }
    let mn = m.checked_mul(n).ok_or_else(|| Error::InvalidDimensions(format!("m*n overflows for m={m}, n={n}")))?;
    Ok(FIXED_STAGES + ceil_log2(mn))
}

fn ceil_log2(v: usize) -> u32 {
    debug_assert!(v >= 1);
    usize::BITS - (v - 1).leading_zeros()
}

pub fn throughput(spec: &PipelineSpec) -> Result<ThroughputReport> {
    spec.validate()?;
    let stages = stage_count(spec.m, spec.n)?;
    let depth = f64::from(stages);
    let (throughput_mips, completion_rate_msps) = match spec.mode {
        PipelineMode::SgdMultiCycle => (spec.clock_mhz, spec.clock_mhz),
        PipelineMode::SgdPipelinedStalled => (spec.clock_mhz / depth, spec.clock_mhz / depth),
        PipelineMode::SmbgdPipelined => (spec.clock_mhz * depth, spec.clock_mhz),
    };
    Ok(ThroughputReport { stages, throughput_mips, completion_rate_msps, clock_speedup: 1.0, throughput_speedup: 1.0 })
}

/// Report for `improved`, with speedups measured against `base`.
pub fn speedup_report(base: &PipelineSpec, improved: &PipelineSpec) -> Result<ThroughputReport> {
    let base_report = throughput(base)?;
    let mut report = throughput(improved)?;
    report.clock_speedup = improved.clock_mhz / base.clock_mhz;
    report.throughput_speedup = report.throughput_mips / base_report.throughput_mips;
    Ok(report)
}

/// Rounds to two decimals, the precision of the published table.
pub fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}
