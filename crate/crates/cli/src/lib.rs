//! Command-line experiment runner. Each subcommand writes one CSV (or TOML
//! for `design`) to `--out` or stdout, plus an optional JSON manifest.

pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{Algorithm, ExperimentConfig};
use error::CliError;
use experiments::SnrSweep;
use manifest::Manifest;

#[derive(Debug, Parser)]
#[command(name = "npfusion", version, about = "Multi-stage Neyman-Pearson fusion experiments")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON provenance sidecar path.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long, global = true)]
    pub stages: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub algo: Option<Algorithm>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fused and per-sensor ROC vertices and slopes.
    Roc,
    /// Steady-state detection against the number of identical sensors.
    SweepN {
        #[arg(long, default_value_t = 1)]
        n_min: usize,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
    },
    /// Steady-state detection against SNR for the Gaussian sensor model.
    SweepSnr {
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        snr_min: f64,
        #[arg(long, default_value_t = 8.0, allow_hyphen_values = true)]
        snr_max: f64,
        #[arg(long, default_value_t = 2.0)]
        snr_step: f64,
    },
    /// Per-stage trajectories of the oracle and fast rules.
    Converge {
        /// Add Monte Carlo estimate columns.
        #[arg(long)]
        monte_carlo: bool,
    },
    /// Fast-rule steady state against the stage-1 false-alarm level.
    SweepQ00 {
        /// Evenly spaced grid points inside (0, alpha).
        #[arg(long, default_value_t = 40)]
        points: usize,
    },
    /// Monte Carlo estimates against analytic trajectories.
    Montecarlo,
    /// Offline parameters of the fast rule.
    Design,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Roc => "roc",
            Command::SweepN { .. } => "sweep-n",
            Command::SweepSnr { .. } => "sweep-snr",
            Command::Converge { .. } => "converge",
            Command::SweepQ00 { .. } => "sweep-q00",
            Command::Montecarlo => "montecarlo",
            Command::Design => "design",
        }
    }
}

struct Resolved {
    cfg: ExperimentConfig,
    stages: usize,
    trials: u64,
    seed: u64,
    algo: Algorithm,
}

fn resolve(common: &CommonArgs) -> Result<Resolved, CliError> {
    let path = common.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let cfg = ExperimentConfig::load(path)?;
    let stages = common.stages.unwrap_or(cfg.stages());
    let trials = common.trials.unwrap_or(cfg.trials());
    if stages == 0 {
        return Err(CliError::Config("stages must be at least 1".into()));
    }
    if trials == 0 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    let seed = common.seed.unwrap_or(cfg.seed());
    let algo = common.algo.unwrap_or(cfg.algorithm());
    Ok(Resolved { cfg, stages, trials, seed, algo })
}

fn snr_sweep(common: &CommonArgs, min_db: f64, max_db: f64, step_db: f64) -> Result<(SnrSweep, Manifest), CliError> {
    let mut sweep = SnrSweep { min_db, max_db, step_db, ..SnrSweep::default() };
    let Some(path) = &common.config else {
        return Ok((sweep, Manifest::without_config("sweep-snr")));
    };
    let cfg = ExperimentConfig::load(path)?;
    if let Some(m) = &cfg.raw.model {
        sweep.amplitude = m.amplitude;
        sweep.y_star = m.y_star;
        sweep.count = m.count;
    } else {
        sweep.count = cfg.fleet.len();
    }
    Ok((sweep, Manifest::new("sweep-snr", &cfg)))
}

/// Runs one subcommand, writing its output and manifest.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let common = &cli.common;
    let (bytes, manifest) = match &cli.command {
        Command::SweepSnr { snr_min, snr_max, snr_step } => {
            let (sweep, manifest) = snr_sweep(common, *snr_min, *snr_max, *snr_step)?;
            (experiments::sweep_snr(&sweep)?, manifest)
        }
        cmd => {
            let r = resolve(common)?;
            let manifest = Manifest::new(cmd.name(), &r.cfg);
            match cmd {
                Command::Roc => (experiments::roc(&r.cfg)?, manifest),
                Command::SweepN { n_min, n_max } => (experiments::sweep_n(&r.cfg, *n_min, *n_max)?, manifest),
                Command::Converge { monte_carlo } => {
                    let mc = monte_carlo.then_some((r.trials, r.seed));
                    let manifest = if *monte_carlo {
                        manifest.with_run(Algorithm::Fast, r.stages, r.trials, r.seed)
                    } else {
                        Manifest { stages: Some(r.stages), ..manifest }
                    };
                    (experiments::converge(&r.cfg, r.stages, mc)?, manifest)
                }
                Command::SweepQ00 { points } => {
                    let sweep = experiments::sweep_q00_csv(&r.cfg, *points)?;
                    for (q00, err) in &sweep.skipped {
                        eprintln!("skipped q00 = {q00:e}: {err}");
                    }
                    (sweep.csv, manifest)
                }
                Command::Montecarlo => {
                    let (bytes, _) = experiments::montecarlo(&r.cfg, r.algo, r.stages, r.trials, r.seed)?;
                    (bytes, manifest.with_run(r.algo, r.stages, r.trials, r.seed))
                }
                Command::Design => (experiments::design(&r.cfg)?.into_bytes(), manifest),
                Command::SweepSnr { .. } => unreachable!("handled above"),
            }
        }
    };
    match &common.out {
        Some(path) => std::fs::write(path, &bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    if let Some(path) = &common.manifest {
        std::fs::write(path, manifest.to_json_pretty()? + "\n")?;
    }
    Ok(())
}
