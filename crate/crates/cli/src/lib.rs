//! Command-line pipeline around the `microgrid-fl` library.
//!
//! Stages: `generate` exports the realized days, `train` runs federated or
//! isolated training, `baseline` solves the perfect-foresight dispatch,
//! `evaluate` scores the trained agents and the no-battery base, and
//! `report` builds the comparison table and improvement deltas. `all` runs
//! the stages in order.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use microgrid_fl::par::Exec;

pub mod config;
pub mod pipeline;
pub mod reports;

pub use config::{Role, RunConfig};
pub use pipeline::{OutDir, TrainMode};

#[derive(Debug, Parser)]
#[command(name = "microgrid-fl", version, about = "Federated battery control for household microgrids")]
pub struct Cli {
    /// TOML run configuration; built-in desk-scale defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Run every stage on a single thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write per-household per-day data CSVs and a manifest.
    Generate {
        /// Days per household; defaults to the configured `eval_days`.
        #[arg(long)]
        days: Option<usize>,
    },
    /// Train agents and write round logs and checkpoints.
    Train {
        #[arg(long, value_enum)]
        mode: TrainMode,
    },
    /// Solve the perfect-foresight dispatch for every household-day.
    Baseline,
    /// Score trained agents and the no-battery base.
    Evaluate,
    /// Build the comparison table and delta CSVs.
    Report,
    /// Run all stages in order.
    All,
    /// Print the resolved configuration as TOML.
    Config,
}

impl Cli {
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }
}

/// Runs one invocation; returns text for stdout.
pub fn run(cli: &Cli) -> Result<String> {
    let cfg = cli.resolve_config()?;
    let out = OutDir::new(&cli.out);
    let exec = cli.exec();
    let done = |what: &str| format!("{what} written to {}\n", out.root().display());
    Ok(match &cli.command {
        Command::Generate { days } => {
            pipeline::cmd_generate(&cfg, &out, days.unwrap_or(cfg.eval_days))?;
            done("data")
        }
        Command::Train { mode } => {
            pipeline::cmd_train(&cfg, &out, *mode, exec)?;
            done(&format!("{} training artifacts", mode.name()))
        }
        Command::Baseline => {
            pipeline::cmd_baseline(&cfg, &out, exec)?;
            done("oracle baseline")
        }
        Command::Evaluate => {
            pipeline::cmd_evaluate(&cfg, &out, exec)?;
            done("evaluation reports")
        }
        Command::Report => pipeline::cmd_report(&cfg, &out)?.table.to_text(),
        Command::All => pipeline::run_all(&cfg, &out, exec)?.table.to_text(),
        Command::Config => cfg.to_toml()?,
    })
}
