use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use easi::{ConvergenceCriterion, Optimizer};
use easi_bench::config::{ArmConfig, ExperimentConfig, Seeds, DEFAULT_CONFIG};
use easi_bench::experiment::{mean_stats, run_experiment, sensitivity};
use easi_bench::output::{emit_csv, read_csv, RunRow, RUNS_FILE};
use easi_bench::plot::emit_plot;
use easi_bench::sweep::{run_sweep, write_sweep_csv};
use easi_bench::table1::table1_report;

/// Thresholds re-scored after a run to show how sensitive the comparison is to the criterion.
const SENSITIVITY_THRESHOLDS: [f64; 3] = [0.02, 0.05, 0.1];

#[derive(Parser)]
#[command(name = "easi-bench", version, about = "Experiment harness for EASI blind source separation")]
struct Cli {
    /// Print the annotated default configuration and exit.
    #[arg(long)]
    print_default_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Seed-swept optimizer comparison; writes CSV files and convergence plots.
    Run(ExperimentArgs),
    /// Grid search over (mu, beta, gamma, P); writes sweep.csv and tuned.toml.
    Sweep(ExperimentArgs),
    /// Pipeline throughput table next to the published values.
    Table1 {
        /// Replace the SMBGD design clock (MHz).
        #[arg(long)]
        clock_mhz: Option<f64>,
        /// Also write table1.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render convergence plots from an existing runs.csv.
    Plot {
        /// Directory containing runs.csv, or the file itself.
        #[arg(long, default_value = "results")]
        input: PathBuf,
        /// Output directory (defaults to the input directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML configuration file (see --print-default-config).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed count `N` (seeds 0..N) or a comma-separated list.
    #[arg(long)]
    seeds: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optimizer arm (sgd, momentum_sgd, smbgd); repeat to compare several. A config arm with
    /// the same optimizer is reused, otherwise defaults apply.
    #[arg(long = "arm")]
    arms: Vec<Optimizer>,
    #[arg(long)]
    max_samples: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn parse_seeds(text: &str) -> anyhow::Result<Seeds> {
    if text.contains(',') {
        let list = text
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<u64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("invalid seed list `{text}`"))?;
        Ok(Seeds::List(list))
    } else {
        Ok(Seeds::Count(text.trim().parse().with_context(|| format!("invalid seed count `{text}`"))?))
    }
}

impl ExperimentArgs {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seeds) = &self.seeds {
            config.seeds = parse_seeds(seeds)?;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(max) = self.max_samples {
            config.max_samples = max;
        }
        if !self.arms.is_empty() {
            config.arms = self
                .arms
                .iter()
                .map(|&opt| {
                    config
                        .arms
                        .iter()
                        .find(|a| a.optimizer == opt)
                        .cloned()
                        .unwrap_or_else(|| ArmConfig::default_for(opt))
                })
                .collect();
        }
        config.validate()?;
        Ok(config)
    }
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

fn cmd_run(args: &ExperimentArgs) -> anyhow::Result<()> {
    let config = args.resolve()?;
    let exp = run_experiment(&config, args.jobs)?;
    let dir = &config.output_dir;
    let mut files = emit_csv(&exp.labels, &exp.outcomes, &exp.summary, config.record_stride, dir)?;
    let rows: Vec<RunRow> = read_csv(&dir.join(RUNS_FILE))?;
    files.extend(emit_plot(&rows, dir)?);

    println!(
        "{} seeds x {} arms, {} samples, threshold {} over {} samples",
        config.seed_list().len(),
        config.arms.len(),
        config.max_samples,
        config.convergence.threshold,
        config.convergence.window
    );
    println!(
        "{:<16} {:>10} {:>10} {:>22} {:>10} {:>9} {:>12}",
        "arm", "mean", "stddev", "95% CI", "converged", "diverged", "improvement"
    );
    for a in &exp.summary.arms {
        let ci = a.ci95.map_or_else(|| "-".to_string(), |(lo, hi)| format!("[{lo:.1}, {hi:.1}]"));
        println!(
            "{:<16} {:>10} {:>10} {:>22} {:>6}/{:<3} {:>9} {:>12}",
            a.arm,
            fmt_opt(a.mean_iters, 1),
            fmt_opt(a.stddev, 1),
            ci,
            a.converged,
            a.runs,
            a.diverged,
            fmt_opt(a.improvement_vs_arm0.map(|v| 100.0 * v), 1) + "%"
        );
    }
    for (i, ratio) in exp.summary.ratios.iter().enumerate().skip(1) {
        match ratio {
            Some(r) => println!(
                "paired ratio {} / {}: {:.3}, 95% CI [{:.3}, {:.3}] over {} seeds",
                exp.labels[i], exp.labels[0], r.ratio, r.ci95.0, r.ci95.1, r.pairs
            ),
            None => println!("paired ratio {} / {}: too few paired seeds", exp.labels[i], exp.labels[0]),
        }
    }
    println!("threshold sensitivity (mean iterations, converged runs):");
    for threshold in SENSITIVITY_THRESHOLDS {
        let criterion = ConvergenceCriterion { threshold, ..config.convergence };
        let cells: Vec<String> = (0..exp.labels.len())
            .map(|arm| {
                let iters = sensitivity(&exp.outcomes, arm, &criterion);
                format!("{} {} ({})", exp.labels[arm], fmt_opt(mean_stats(&iters).0, 1), iters.len())
            })
            .collect();
        println!("  {threshold:<5} {}", cells.join("  "));
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_sweep(args: &ExperimentArgs) -> anyhow::Result<()> {
    let config = args.resolve()?;
    let result = run_sweep(&config, args.jobs)?;
    let dir = &config.output_dir;
    let csv = write_sweep_csv(&result, dir)?;

    println!("{:>8} {:>6} {:>6} {:>4} {:>10} {:>10} {:>10}", "mu", "beta", "gamma", "P", "mean", "stddev", "converged");
    for (i, p) in result.points.iter().enumerate() {
        println!(
            "{:>8} {:>6} {:>6} {:>4} {:>10} {:>10} {:>6}/{:<3}{}",
            p.mu,
            p.beta,
            p.gamma,
            p.batch_size,
            fmt_opt(p.mean_iters, 1),
            fmt_opt(p.stddev, 1),
            p.converged,
            p.runs,
            if result.best == Some(i) { " <- best" } else { "" }
        );
    }
    println!("wrote {}", csv.display());

    let Some(best) = result.best_hyper() else {
        println!("no grid point reached the required converged fraction; tuned.toml not written");
        return Ok(());
    };
    let mut tuned = config.clone();
    for arm in tuned.arms.iter_mut().filter(|a| a.optimizer == result.optimizer) {
        arm.mu = best.mu;
        arm.beta = best.beta;
        arm.gamma = best.gamma;
        arm.batch_size = best.batch_size;
    }
    let path = dir.join("tuned.toml");
    let text = format!(
        "# Best {} grid point from the sweep in this directory.\n{}",
        result.optimizer.name(),
        toml::to_string(&tuned)?
    );
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_table1(clock_mhz: Option<f64>, out: Option<&Path>) -> anyhow::Result<()> {
    let table = table1_report(clock_mhz)?;
    print!("{}", table.render_text());
    if let Some(dir) = out {
        println!("wrote {}", table.write_csv(dir)?.display());
    }
    if table.has_mismatch() {
        bail!("reproduced values differ from the published table by more than 0.01");
    }
    Ok(())
}

fn cmd_plot(input: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let (runs, dir) = if input.is_dir() {
        (input.join(RUNS_FILE), input.to_path_buf())
    } else {
        (input.to_path_buf(), input.parent().unwrap_or(Path::new(".")).to_path_buf())
    };
    let rows: Vec<RunRow> = read_csv(&runs)?;
    for f in emit_plot(&rows, out.unwrap_or(&dir))? {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = if cli.print_default_config {
        print!("{DEFAULT_CONFIG}");
        Ok(())
    } else {
        match &cli.command {
            Some(Command::Run(args)) => cmd_run(args),
            Some(Command::Sweep(args)) => cmd_sweep(args),
            Some(Command::Table1 { clock_mhz, out }) => cmd_table1(*clock_mhz, out.as_deref()),
            Some(Command::Plot { input, out }) => cmd_plot(input, out.as_deref()),
            None => Err(anyhow::anyhow!("no subcommand given (try --help)")),
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
