//! Seed-swept optimizer comparisons.
//!
//! Every `(seed, arm)` pair is one independent run. All arms of a seed share the mixing
//! matrix, the source stream and the initial separator, so per-seed outcomes are paired.

use easi::{amari_index, matmul, ConvergenceCriterion, Hyperparameters, MixingModel, RunRecord, SeparatorState};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::config::{ArmConfig, ExperimentConfig};

const MIXING_STREAM: u64 = 0;
const SOURCE_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;

/// Independent sub-seed for one purpose of a run seed.
pub fn derive_seed(seed: u64, purpose: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng.next_u64()
}

pub fn build_model(config: &ExperimentConfig, seed: u64) -> easi::Result<MixingModel> {
    MixingModel::random(
        config.mixture.m,
        config.mixture.sources.clone(),
        config.mixture.schedule,
        derive_seed(seed, MIXING_STREAM),
    )
}

/// Streams one run and records the Amari index after every sample.
pub fn run_single(config: &ExperimentConfig, hyper: &Hyperparameters, seed: u64) -> easi::Result<RunRecord> {
    let model = build_model(config, seed)?;
    let mut sep = SeparatorState::<f32>::init(model.n(), model.m(), hyper, derive_seed(seed, INIT_STREAM))?;
    let criterion = config.convergence;
    let mut record = RunRecord::default();
    let mut streak = 0usize;

    for (_, sample) in model.stream(derive_seed(seed, SOURCE_STREAM)).take(config.max_samples) {
        sep.step_sample(&sample.x.cast(), hyper)?;
        if sep.is_diverged() {
            record.diverged = true;
            break;
        }
        let c = matmul(&sep.b.cast::<f64>(), &sample.a_t)?;
        // A zero row or column in C means nothing is separated: score it as the worst case.
        let index = amari_index(&c).unwrap_or(1.0);
        record.push(index);

        streak = if index < criterion.threshold { streak + 1 } else { 0 };
        if config.stop_at_convergence && streak >= criterion.window {
            break;
        }
    }
    record.finish(&criterion);
    Ok(record)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub seed: u64,
    pub arm: usize,
    pub record: RunRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub arm: String,
    pub runs: usize,
    pub mean_iters: Option<f64>,
    pub stddev: Option<f64>,
    pub ci95: Option<(f64, f64)>,
    pub converged: usize,
    pub diverged: usize,
    pub improvement_vs_arm0: Option<f64>,
}

/// Paired ratio `mean(arm) / mean(arm0)` over seeds where both converged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate {
    pub ratio: f64,
    pub ci95: (f64, f64),
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSummary {
    pub arms: Vec<ArmSummary>,
    /// Entry `i` compares arm `i` with arm 0; `None` for arm 0 or with fewer than two pairs.
    pub ratios: Vec<Option<RatioEstimate>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub labels: Vec<String>,
    pub outcomes: Vec<RunOutcome>,
    pub summary: ComparisonSummary,
}

/// Runs every `(seed, arm)` pair, fanned out over `jobs` threads (0 = all cores).
///
/// Results are ordered by seed then arm regardless of completion order.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> anyhow::Result<Experiment> {
    config.validate()?;
    let tasks: Vec<(u64, usize)> =
        config.seed_list().into_iter().flat_map(|seed| (0..config.arms.len()).map(move |arm| (seed, arm))).collect();
    let hypers: Vec<Hyperparameters> = config.arms.iter().map(ArmConfig::hyper).collect();

    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let outcomes = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(seed, arm)| run_single(config, &hypers[arm], seed).map(|record| RunOutcome { seed, arm, record }))
            .collect::<easi::Result<Vec<_>>>()
    })?;

    let labels: Vec<String> = config.arms.iter().map(ArmConfig::label).collect();
    let summary = summarize(&labels, &outcomes);
    Ok(Experiment { labels, outcomes, summary })
}

/// `1 − mean/baseline`: the fractional reduction in iterations relative to the baseline.
pub fn improvement(mean: f64, baseline: f64) -> f64 {
    1.0 - mean / baseline
}

/// Mean, sample standard deviation and two-sided 95% Student-t interval.
pub fn mean_stats(values: &[f64]) -> (Option<f64>, Option<f64>, Option<(f64, f64)>) {
    let n = values.len();
    if n == 0 {
        return (None, None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let half = t_quantile(n - 1) * sd / (n as f64).sqrt();
    (Some(mean), Some(sd), Some((mean - half, mean + half)))
}

fn t_quantile(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64).expect("dof >= 1").inverse_cdf(0.975)
}

/// Delta-method interval for the paired ratio of means `Σs/Σb`.
pub fn paired_ratio(pairs: &[(f64, f64)]) -> Option<RatioEstimate> {
    let k = pairs.len();
    if k < 2 {
        return None;
    }
    let mean_base = pairs.iter().map(|p| p.0).sum::<f64>() / k as f64;
    let mean_arm = pairs.iter().map(|p| p.1).sum::<f64>() / k as f64;
    let ratio = mean_arm / mean_base;
    let resid_var = pairs.iter().map(|&(b, a)| (a - ratio * b).powi(2)).sum::<f64>() / (k - 1) as f64;
    let se = (resid_var / k as f64).sqrt() / mean_base;
    let half = t_quantile(k - 1) * se;
    Some(RatioEstimate { ratio, ci95: (ratio - half, ratio + half), pairs: k })
}

pub fn summarize(labels: &[String], outcomes: &[RunOutcome]) -> ComparisonSummary {
    let iters_of = |arm: usize| -> Vec<(u64, f64)> {
        outcomes
            .iter()
            .filter(|o| o.arm == arm && !o.record.diverged)
            .filter_map(|o| o.record.iterations_to_convergence.map(|it| (o.seed, it as f64)))
            .collect()
    };

    let mut arms: Vec<ArmSummary> = labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let iters: Vec<f64> = iters_of(i).into_iter().map(|(_, v)| v).collect();
            let (mean_iters, stddev, ci95) = mean_stats(&iters);
            ArmSummary {
                arm: label.clone(),
                runs: outcomes.iter().filter(|o| o.arm == i).count(),
                mean_iters,
                stddev,
                ci95,
                converged: iters.len(),
                diverged: outcomes.iter().filter(|o| o.arm == i && o.record.diverged).count(),
                improvement_vs_arm0: None,
            }
        })
        .collect();

    let baseline = arms.first().and_then(|a| a.mean_iters);
    for arm in &mut arms {
        arm.improvement_vs_arm0 = match (arm.mean_iters, baseline) {
            (Some(m), Some(b)) => Some(improvement(m, b)),
            _ => None,
        };
    }

    let base_iters = iters_of(0);
    let ratios = (0..labels.len())
        .map(|i| {
            if i == 0 {
                return None;
            }
            let arm_iters = iters_of(i);
            let pairs: Vec<(f64, f64)> = base_iters
                .iter()
                .filter_map(|&(seed, b)| arm_iters.iter().find(|(s, _)| *s == seed).map(|&(_, a)| (b, a)))
                .collect();
            paired_ratio(&pairs)
        })
        .collect();

    ComparisonSummary { arms, ratios }
}

/// Iterations to convergence of the non-diverged runs of `arm`, re-scored under `criterion`.
pub fn sensitivity(outcomes: &[RunOutcome], arm: usize, criterion: &ConvergenceCriterion) -> Vec<f64> {
    outcomes
        .iter()
        .filter(|o| o.arm == arm && !o.record.diverged)
        .filter_map(|o| easi::check_convergence(&o.record.amari, criterion).map(|t| (t + 1) as f64))
        .collect()
}
