//! Argument parsing and dispatch.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands;
use crate::config::{ModelChoice, RunConfig};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "granular", version, about = "Granular counting and Bayesian inference on fuzzy counts")]
pub struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Override one configuration value, e.g. `--set hmc.n_draws=500` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Granular counts from a possibility CSV (`sample_id,obs_id,<referent>...`).
    Count {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Beta-type statistics (c, h) for every granular count.
    Fit {
        #[arg(long)]
        counts: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthetic observations and covariates from the `[simulate]` parameters.
    Simulate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Posterior draws, summary and diagnostics for one model.
    Infer {
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        covariates: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `model.kind`.
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
    },
    /// Posterior predictive check of one or more models against the observed statistics.
    Ppc {
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        covariates: PathBuf,
        /// Draws CSV written by `infer` (repeat to compare models).
        #[arg(long, required = true)]
        draws: Vec<PathBuf>,
        /// Raw granular counts for energy components on unfitted memberships.
        #[arg(long)]
        counts: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the reporting-kernel matrix and CAR verdicts of a kernel JSON file.
    KernelAudit {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration, defaults included.
    ShowConfig,
    /// Run the stages listed in `[pipeline]`.
    Run,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModelArg {
    Cnar,
    Car1,
    Car2,
    Proxy,
}

impl From<ModelArg> for ModelChoice {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Cnar => ModelChoice::Cnar,
            ModelArg::Car1 => ModelChoice::Car1,
            ModelArg::Car2 => ModelChoice::Car2,
            ModelArg::Proxy => ModelChoice::Proxy,
        }
    }
}

/// Loads the configuration and runs the subcommand; text meant for the user goes to stdout.
pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match &cli.command {
        Command::Count { input, out } => {
            commands::count(input, out)?;
        }
        Command::Fit { counts, out } => {
            commands::fit(counts, out, &cfg)?;
        }
        Command::Simulate { out } => {
            commands::simulate(&cfg, out)?;
        }
        Command::Infer { stats, covariates, out, model } => {
            let kind = model.map_or(cfg.kind(), |m| ModelChoice::from(m).into());
            let res = commands::infer(stats, covariates, out, &cfg, kind)?;
            println!(
                "{:<16} {:>10} {:>10} {:>10} {:>10} {:>8} {:>8}",
                "param", "mean", "sd", "q05", "q95", "rhat", "ess"
            );
            for d in &res.draws.diagnostics {
                let rhat = d.rhat.map_or("-".to_string(), |r| format!("{r:.4}"));
                println!(
                    "{:<16} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>8} {:>8.0}",
                    d.name, d.mean, d.sd, d.q05, d.q95, rhat, d.ess_bulk
                );
            }
        }
        Command::Ppc { stats, covariates, draws, counts, out } => {
            let res = commands::ppc(stats, covariates, draws, counts.as_deref(), out, &cfg)?;
            let obs = &res.models[0].1;
            println!(
                "observed: scaled_mean={:.5} iqr80={:.5} u_obs={:.5}",
                obs.observed_mean, obs.observed_iqr80, obs.u_obs
            );
            for (kind, s) in &res.models {
                println!(
                    "{:<6} p_mean={:.3} p_iqr80={:.3} mean|u_cross-u_obs|={:.5}",
                    kind.name(),
                    s.p_mean,
                    s.p_iqr80,
                    s.mean_cross_gap()
                );
            }
        }
        Command::KernelAudit { kernel, out } => {
            print!("{}", commands::kernel_audit(kernel, out.as_deref(), &cfg)?.render());
        }
        Command::ShowConfig => print!("{}", cfg.to_toml()),
        Command::Run => {
            commands::run_pipeline(&cfg)?;
        }
    }
    Ok(())
}

/// Sizes the global worker pool; 0 keeps rayon's default of one thread per core.
pub fn init_workers(workers: usize) -> Result<()> {
    if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Config(format!("workers: {e}")))?;
    }
    Ok(())
}
