//! `stochbed` command-line runner.
//!
//! Exit status: 0 when every replication succeeded, 1 when some failed (the
//! manifest lists which), 2 for usage or configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use stochbed::experiment::{compare, run_experiment, ConfigLayer, ExperimentConfig, MethodId, Problem};

#[derive(Parser, Debug)]
#[command(name = "stochbed", version, about = "Sequential sampling for exceedance probabilities of stochastic responses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Replicated runs of one method.
    Run(Common),
    /// Several methods on the same seeds and budget.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated method ids.
        #[arg(long, value_delimiter = ',', default_value = "seq-vhgpr,lh-vhgpr,lh-sgpr")]
        methods: Vec<String>,
    },
    /// Reference value of the configured problem.
    Oracle(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Key-value (TOML) config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// synthetic1d, fourbranch2d or shiproll.
    #[arg(long)]
    problem: Option<String>,
    /// seq-vhgpr, lh-vhgpr, lh-sgpr or exact-mc.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    n_init: Option<usize>,
    #[arg(long)]
    n_iter: Option<usize>,
    /// Number of replications.
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed; replication i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replications run at once.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Length of the ship's wave record in hours.
    #[arg(long)]
    ship_hours: Option<f64>,
    /// Monte Carlo samples for the reference value.
    #[arg(long)]
    oracle_samples: Option<usize>,
    #[arg(long)]
    oracle_seed: Option<u64>,
    /// Record wall times in the per-run CSVs (makes them non-reproducible).
    #[arg(long)]
    timing: bool,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(p) => ConfigLayer::load(p)?,
            None => ConfigLayer::default(),
        };
        let flags = ConfigLayer {
            problem: self.problem.clone(),
            method: self.method.clone(),
            n_init: self.n_init,
            n_iter: self.n_iter,
            replications: self.reps,
            seed: self.seed,
            out: self.out.clone(),
            jobs: self.jobs,
            threshold: self.threshold,
            ship_hours: self.ship_hours,
            oracle_samples: self.oracle_samples,
            oracle_seed: self.oracle_seed,
            record_timing: self.timing.then_some(true),
            ..ConfigLayer::default()
        };
        Ok(ExperimentConfig::from_layers(&[file, flags])?)
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"))
}

/// Returns whether every replication succeeded.
fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run(c) => {
            let cfg = c.config()?;
            let o = run_experiment(&cfg).context("experiment failed")?;
            let oracle = o.manifest.oracle.as_ref().map(|e| e.value);
            if let Some(last) = o.summary.last() {
                println!(
                    "{} {} iter {}: mean {} std {} median {} oracle {}",
                    cfg.problem,
                    cfg.method.id(),
                    last.iter,
                    fmt(last.mean),
                    fmt(last.std),
                    fmt(last.median),
                    fmt(oracle)
                );
            }
            if !o.manifest.all_succeeded() {
                eprintln!("failed replications: {:?} (see {})", o.manifest.failed, cfg.out.join("manifest.json").display());
            }
            Ok(o.manifest.all_succeeded())
        }
        Command::Compare { common, methods } => {
            let cfg = common.config()?;
            let methods = methods.iter().map(|m| MethodId::parse(m)).collect::<Result<Vec<_>, _>>()?;
            let (report, _) = compare(&methods, &cfg).context("comparison failed")?;
            println!("{} oracle {:.6} ± {:.6}", report.problem, report.oracle.value, report.oracle.std_error);
            for e in &report.entries {
                println!(
                    "{:<10} mean {} std {} median {} ratio {}",
                    e.method.id(),
                    fmt(e.final_mean),
                    fmt(e.final_std),
                    fmt(e.final_median),
                    fmt(e.ratio_median)
                );
            }
            Ok(report.all_succeeded())
        }
        Command::Oracle(c) => {
            let cfg = c.config()?;
            let prob = Problem::build(&cfg)?;
            let e = prob.reference(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&e)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
