use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use coordgate::{Error, Result};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::experiments;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Boundary,
    Conv1d,
    Ablation,
    Deblur,
    Report,
}

impl From<Command> for ExperimentKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Boundary => Self::Boundary,
            Command::Conv1d => Self::Conv1d,
            Command::Ablation => Self::Ablation,
            Command::Deblur => Self::Deblur,
            Command::Report => Self::Report,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "coordgate-lab", version, about = "Run coordinate-gated convolution experiments")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Full-scale epochs and dataset sizes.
    #[arg(long)]
    pub full_scale: bool,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Parse(_) => EXIT_CONFIG,
        Error::TrainingAbort { .. } => EXIT_ABORT,
        _ => EXIT_FAILURE,
    }
}

/// Loads the config, applies command-line overrides and runs the command.
pub fn run(args: &Args) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    let kind = ExperimentKind::from(args.command);
    if cfg.kind != kind {
        return Err(Error::Config(format!(
            "config is for `{}`, command is `{}`",
            cfg.kind.as_str(),
            kind.as_str()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.full_scale {
        cfg = cfg.full_scale();
    }
    match kind {
        ExperimentKind::Boundary => experiments::cmd_boundary(&cfg, &args.out).map(drop),
        ExperimentKind::Conv1d => experiments::cmd_conv1d(&cfg, &args.out).map(drop),
        ExperimentKind::Ablation => experiments::cmd_ablation(&cfg, &args.out).map(drop),
        ExperimentKind::Deblur => experiments::cmd_deblur(&cfg, &args.out).map(drop),
        ExperimentKind::Report => experiments::cmd_report(&cfg, &args.out).map(drop),
    }
}
