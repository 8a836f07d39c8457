//! Hyperparameter grid search over (μ, β, γ, P).

use std::path::{Path, PathBuf};

use anyhow::Context;
use easi::Hyperparameters;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, SweepConfig};
use crate::experiment::{mean_stats, run_single};

/// Grid points in row-major order over `mu`, `beta`, `gamma`, `batch_size`.
pub fn grid(sweep: &SweepConfig) -> Vec<Hyperparameters> {
    let mut points = Vec::new();
    for &mu in &sweep.mu {
        for &beta in &sweep.beta {
            for &gamma in &sweep.gamma {
                for &batch_size in &sweep.batch_size {
                    points.push(Hyperparameters {
                        mu,
                        beta,
                        gamma,
                        batch_size,
                        optimizer: sweep.optimizer,
                        ..Hyperparameters::default()
                    });
                }
            }
        }
    }
    points
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub mu: f64,
    pub beta: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub mean_iters: Option<f64>,
    pub stddev: Option<f64>,
    pub converged: usize,
    pub diverged: usize,
    pub runs: usize,
}

impl SweepPoint {
    pub fn hyper(&self, template: &Hyperparameters) -> Hyperparameters {
        Hyperparameters { mu: self.mu, beta: self.beta, gamma: self.gamma, batch_size: self.batch_size, ..*template }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub optimizer: easi::Optimizer,
    pub points: Vec<SweepPoint>,
    /// Index of the eligible point with the lowest mean iterations.
    pub best: Option<usize>,
}

impl SweepResult {
    pub fn best_hyper(&self) -> Option<Hyperparameters> {
        let template = Hyperparameters::with_optimizer(self.optimizer);
        self.best.map(|i| self.points[i].hyper(&template))
    }
}

/// Runs every grid point over every seed of `config`.
pub fn run_sweep(config: &ExperimentConfig, jobs: usize) -> anyhow::Result<SweepResult> {
    config.validate()?;
    let points = grid(&config.sweep);
    let seeds = config.seed_list();
    let tasks: Vec<(usize, u64)> = (0..points.len()).flat_map(|p| seeds.iter().map(move |&s| (p, s))).collect();

    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let outcomes: Vec<(Option<usize>, bool)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(p, seed)| run_single(config, &points[p], seed).map(|r| (r.iterations_to_convergence, r.diverged)))
            .collect::<easi::Result<Vec<_>>>()
    })?;

    let results: Vec<SweepPoint> = points
        .iter()
        .enumerate()
        .map(|(p, hyper)| {
            let runs = &outcomes[p * seeds.len()..(p + 1) * seeds.len()];
            let iters: Vec<f64> = runs.iter().filter(|r| !r.1).filter_map(|r| r.0.map(|v| v as f64)).collect();
            let (mean_iters, stddev, _) = mean_stats(&iters);
            SweepPoint {
                mu: hyper.mu,
                beta: hyper.beta,
                gamma: hyper.gamma,
                batch_size: hyper.batch_size,
                mean_iters,
                stddev,
                converged: iters.len(),
                diverged: runs.iter().filter(|r| r.1).count(),
                runs: runs.len(),
            }
        })
        .collect();

    let best = select_best(&results, config.sweep.min_converged_fraction);
    Ok(SweepResult { optimizer: config.sweep.optimizer, points: results, best })
}

/// Lowest mean among points whose converged fraction reaches `min_fraction`; the first such
/// point in grid order wins ties.
pub fn select_best(points: &[SweepPoint], min_fraction: f64) -> Option<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.runs > 0 && p.converged as f64 >= min_fraction * p.runs as f64)
        .filter_map(|(i, p)| p.mean_iters.map(|m| (i, m)))
        .fold(None, |best: Option<(usize, f64)>, (i, m)| match best {
            Some((_, bm)) if bm <= m => best,
            _ => Some((i, m)),
        })
        .map(|(i, _)| i)
}

pub fn write_sweep_csv(result: &SweepResult, dir: &Path) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    for p in &result.points {
        w.serialize(p).with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
