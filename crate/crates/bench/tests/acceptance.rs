//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p easi-bench --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use easi::numerics::{matmul, matvec, Mat, Vector};
use easi::pipeline::round2;
use easi::signal::{build_mixing, SourceStream};
use easi::{
    amari_index, check_convergence, speedup_report, stage_count, throughput, Hyperparameters, MixingModel, Optimizer,
    PipelineMode, PipelineSpec, Schedule, SeparatorState, SourceSpec,
};
use easi_bench::config::{ArmConfig, ExperimentConfig, Seeds};
use easi_bench::experiment::{improvement, run_experiment, run_single};
use easi_bench::sweep::run_sweep;
use easi_bench::table1::{table1_report, Flag};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_cent(v: f64, want: f64) -> bool {
    (round2(v) - want).abs() <= 0.01 + 1e-9
}

fn table1_arithmetic() -> Outcome {
    let stages = stage_count(4, 2).map_err(|e| e.to_string())?;
    let sgd = PipelineSpec::new(4, 2, 4.81, PipelineMode::SgdMultiCycle).map_err(|e| e.to_string())?;
    let smbgd = PipelineSpec::new(4, 2, 55.17, PipelineMode::SmbgdPipelined).map_err(|e| e.to_string())?;
    let tp = throughput(&smbgd).map_err(|e| e.to_string())?.throughput_mips;
    let r = speedup_report(&sgd, &smbgd).map_err(|e| e.to_string())?;
    let table = table1_report(None).map_err(|e| e.to_string())?;
    let clock_flag = table.row("clock_speedup").map(|r| r.flag);

    let detail = format!(
        "stages {stages}, throughput {:.2} MIPS, throughput speedup {:.2}, clock speedup {:.2} (published 11.46, flag {:?})",
        tp, r.throughput_speedup, r.clock_speedup, clock_flag
    );
    ensure(
        stages == 13
            && within_cent(tp, 717.21)
            && within_cent(r.throughput_speedup, 149.11)
            && round2(r.clock_speedup) == 11.47
            && clock_flag == Some(Flag::Rounding)
            && !table.has_mismatch(),
        detail,
    )
}

fn comparison_config(seeds: Seeds, arms: Vec<ArmConfig>) -> ExperimentConfig {
    ExperimentConfig { seeds, arms, stop_at_convergence: true, ..ExperimentConfig::default() }
}

/// Tuning seeds are disjoint from the evaluation seeds 0..50.
const TUNING_SEEDS: std::ops::Range<u64> = 1000..1020;

fn convergence_improvement() -> Outcome {
    let mut tuning =
        comparison_config(Seeds::List(TUNING_SEEDS.collect()), vec![ArmConfig::default_for(Optimizer::Smbgd)]);
    tuning.sweep.optimizer = Optimizer::Smbgd;
    let sweep = run_sweep(&tuning, 0).map_err(|e| format!("{e:#}"))?;
    let tuned = sweep.best_hyper().ok_or("no sweep point reached the converged fraction")?;

    // SGD has no (β, γ) to tune; it runs at the shared defaults μ = 0.01.
    let config =
        comparison_config(Seeds::Count(50), vec![ArmConfig::default_for(Optimizer::Sgd), ArmConfig::from_hyper(tuned)]);
    let exp = run_experiment(&config, 0).map_err(|e| format!("{e:#}"))?;
    let sgd = &exp.summary.arms[0];
    let smbgd = &exp.summary.arms[1];
    let ratio = exp.summary.ratios[1].ok_or("too few seeds where both arms converged")?;
    let detail = format!(
        "tuned beta {} gamma {}; SGD mean {:.1} ({}/50), SMBGD mean {:.1} ({}/50); paired ratio {:.3}, 95% CI [{:.3}, {:.3}] over {} seeds",
        tuned.beta,
        tuned.gamma,
        sgd.mean_iters.unwrap_or(f64::NAN),
        sgd.converged,
        smbgd.mean_iters.unwrap_or(f64::NAN),
        smbgd.converged,
        ratio.ratio,
        ratio.ci95.0,
        ratio.ci95.1,
        ratio.pairs
    );
    ensure(ratio.ratio <= 0.85 && ratio.ci95.1 < 1.0, detail)
}

fn separation_quality() -> Outcome {
    let config = comparison_config(Seeds::Count(50), vec![ArmConfig::default_for(Optimizer::Smbgd)]);
    let exp = run_experiment(&config, 0).map_err(|e| format!("{e:#}"))?;
    let converged = exp.summary.arms[0].converged;
    ensure(
        converged * 10 >= 50 * 9,
        format!("{converged}/50 seeds held Amari index < 0.05 for 100 samples within 50000 samples"),
    )
}

fn inverse(a: &Mat<f64>) -> Mat<f64> {
    let dm = DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice());
    let inv = dm.try_inverse().expect("well-conditioned mixing is invertible");
    let inv = &inv;
    let data = (0..a.rows()).flat_map(|i| (0..a.cols()).map(move |j| inv[(i, j)])).collect();
    Mat::from_vec(a.rows(), a.cols(), data).unwrap()
}

fn equivariance() -> Outcome {
    let n = 3;
    let hyper = Hyperparameters::default();
    let mut worst = 0.0f64;
    for pair in 0..20u64 {
        let c0 = SeparatorState::<f64>::init(n, n, &hyper, 100 + pair).map_err(|e| e.to_string())?.b;
        let mut runs = Vec::new();
        for a in [build_mixing(n, n, 2 * pair), build_mixing(n, n, 2 * pair + 1)] {
            let a = a.map_err(|e| e.to_string())?;
            let b0 = matmul(&c0, &inverse(&a)).unwrap();
            runs.push((a, SeparatorState::from_matrix(b0).map_err(|e| e.to_string())?));
        }
        let mut sources = SourceStream::new(&vec![SourceSpec::Uniform; n], 500 + pair);
        for t in 0..1000 {
            let s: Vector<f64> = sources.sample(t);
            let mut cs = Vec::new();
            for (a, sep) in &mut runs {
                sep.step_sample(&matvec(a, &s).unwrap(), &hyper).map_err(|e| e.to_string())?;
                cs.push(matmul(&sep.b, a).unwrap());
            }
            for (x, y) in cs[0].as_slice().iter().zip(cs[1].as_slice()) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    ensure(worst < 1e-3, format!("20 pairs, 1000 f64 steps, max |C1 - C2| = {worst:.3e}"))
}

fn reductions() -> Outcome {
    let model =
        MixingModel::random(4, vec![SourceSpec::Uniform; 2], Schedule::Stationary, 11).map_err(|e| e.to_string())?;
    let xs: Vec<Vector<f32>> = model.stream(12).take(10_000).map(|(_, s)| s.x.cast()).collect();
    let sgd = Hyperparameters { optimizer: Optimizer::Sgd, ..Default::default() };
    let mom = Hyperparameters { optimizer: Optimizer::MomentumSgd, gamma: 0.5, ..Default::default() };
    let reduced = |gamma| Hyperparameters { batch_size: 1, beta: 0.5, gamma, ..Default::default() };

    for (name, reference, candidate) in [("SGD", sgd, reduced(0.0)), ("MomentumSGD", mom, reduced(0.5))] {
        let mut a = SeparatorState::<f32>::init(2, 4, &reference, 13).map_err(|e| e.to_string())?;
        let mut b = a.clone();
        for (t, x) in xs.iter().enumerate() {
            a.step_sample(x, &reference).map_err(|e| e.to_string())?;
            b.step_sample(x, &candidate).map_err(|e| e.to_string())?;
            let same = a.b.as_slice().iter().zip(b.b.as_slice()).all(|(p, q)| p.to_bits() == q.to_bits());
            if !same {
                return Err(format!("SMBGD(P=1) diverged bitwise from {name} at step {t}"));
            }
        }
    }
    Ok("SMBGD(P=1, gamma=0) == SGD and SMBGD(P=1, gamma=0.5) == MomentumSGD bitwise over 10000 f32 steps".into())
}

/// `β^{P−1}·γ·Ĥ_prev·[k > 0] + μ·Σ_p β^{P−1−p}·H_p` in f64.
fn unrolled(prev: &[f64], grads: &[Vec<f64>], hyper: &Hyperparameters, first_batch: bool) -> Vec<f64> {
    let len = grads.len() as i32;
    let carry = if first_batch { 0.0 } else { hyper.gamma * hyper.beta.powi(len - 1) };
    (0..prev.len())
        .map(|e| {
            let chained: f64 = grads.iter().enumerate().map(|(p, h)| hyper.beta.powi(len - 1 - p as i32) * h[e]).sum();
            carry * prev[e] + hyper.mu * chained
        })
        .collect()
}

fn accumulator_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for batch in [1usize, 2, 4, 8] {
        for stream in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(stream * 16 + batch as u64);
            let hyper = Hyperparameters {
                mu: rng.random_range(1e-4..0.05),
                beta: rng.random_range(0.0..0.99),
                gamma: rng.random_range(0.0..0.99),
                batch_size: batch,
                ..Default::default()
            };
            let mut state = SeparatorState::<f32>::init(3, 3, &hyper, stream).map_err(|e| e.to_string())?;
            for k in 0..3 {
                let prev: Vec<f64> = state.h_momentum.as_slice().iter().map(|&v| f64::from(v)).collect();
                let mut grads = Vec::new();
                for _ in 0..batch {
                    let x = Vector::from_vec((0..3).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap();
                    let r = state.step_sample(&x, &hyper).map_err(|e| e.to_string())?;
                    grads.push(r.h.as_slice().iter().map(|&v| f64::from(v)).collect::<Vec<f64>>());
                }
                let expected = unrolled(&prev, &grads, &hyper, k == 0);
                let norm = expected.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
                for (got, want) in state.h_momentum.as_slice().iter().zip(&expected) {
                    worst = worst.max((f64::from(*got) - want).abs() / norm);
                }
            }
        }
    }
    ensure(worst <= 1e-6, format!("P in {{1,2,4,8}} x 100 streams x 3 batches, max relative error {worst:.3e}"))
}

const ROTATION_START: u64 = 20_000;
const HOLD_SAMPLES: usize = 50_000;

fn adaptivity() -> Outcome {
    let mut config = comparison_config(Seeds::Count(20), vec![ArmConfig::default_for(Optimizer::Smbgd)]);
    config.stop_at_convergence = false;
    config.max_samples = ROTATION_START as usize + HOLD_SAMPLES;
    config.mixture.schedule = Schedule::Rotating { rate: 1e-5, plane: (0, 1), start: ROTATION_START };
    let hyper = config.arms[0].hyper();

    let mut held = 0;
    let mut worst_peak = 0.0f64;
    for seed in config.seed_list() {
        let record = run_single(&config, &hyper, seed).map_err(|e| e.to_string())?;
        let start = ROTATION_START as usize;
        if record.diverged || record.amari.len() < start + HOLD_SAMPLES {
            continue;
        }
        let converged_first = check_convergence(&record.amari[..start], &config.convergence).is_some();
        let peak = record.amari[start..].iter().fold(0.0f64, |a, &v| a.max(v));
        worst_peak = worst_peak.max(peak);
        if converged_first && peak < 0.2 {
            held += 1;
        }
    }
    ensure(
        held * 10 >= 20 * 8,
        format!("{held}/20 seeds converged before the rotation and kept Amari index < 0.2 for {HOLD_SAMPLES} samples (worst peak {worst_peak:.3})"),
    )
}

fn metric_checks() -> Outcome {
    let m = |r: usize, c: usize, v: Vec<f64>| Mat::from_vec(r, c, v).unwrap();
    let amari = |c: &Mat<f64>| amari_index(c).unwrap();
    let mut failures = Vec::new();

    if amari(&Mat::<f64>::identity(3)) != 0.0 {
        failures.push("I");
    }
    if amari(&m(2, 2, vec![0.0, 3.0, -5.0, 0.0])) != 0.0 || amari(&m(2, 2, vec![3.0, 0.0, 0.0, -5.0])) != 0.0 {
        failures.push("scaled permutation");
    }
    if amari(&m(2, 2, vec![1.0, 1.0, 1.0, 1.0])) != 1.0 {
        failures.push("all-ones");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let perms: [[usize; 3]; 3] = [[0, 1, 2], [2, 0, 1], [1, 2, 0]];
    for _ in 0..200 {
        let c = m(3, 3, (0..9).map(|_| rng.random_range(-5.0..5.0)).collect());
        let base = amari(&c);
        for alpha in [2.0, -0.5, 8.0, -0.125] {
            if amari(&c.scale(alpha)) != base {
                failures.push("scale invariance (power-of-two alpha)");
            }
        }
        let alpha: f64 = rng.random_range(0.1..10.0);
        if (amari(&c.scale(alpha)) - base).abs() > 1e-12 * base.max(1.0) {
            failures.push("scale invariance (general alpha)");
        }
        for p in perms {
            for q in perms {
                let permuted = m(3, 3, (0..9).map(|e| c[(p[e / 3], q[e % 3])]).collect());
                if amari(&permuted) != base {
                    failures.push("permutation invariance");
                }
            }
        }
    }

    let imp = improvement(3166.0, 4166.0);
    if (imp * 100.0).round() != 24.0 {
        failures.push("aggregation formula");
    }
    failures.dedup();
    ensure(
        failures.is_empty(),
        if failures.is_empty() {
            format!("examples exact; permutation and power-of-two scale invariance exact, general scale within 1e-12; 1 - 3166/4166 = {imp:.4}")
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("throughput table arithmetic", table1_arithmetic),
        ("convergence improvement", convergence_improvement),
        ("separation quality", separation_quality),
        ("equivariance", equivariance),
        ("optimizer reductions", reductions),
        ("accumulator oracle", accumulator_oracle),
        ("adaptivity", adaptivity),
        ("metrics", metric_checks),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("criterion 9 INFO synthesis results (clocks, ALM/DSP/register counts) are inputs, not reproduced");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
