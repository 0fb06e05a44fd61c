//! `envtrack` — driver for the neural envelope tracking analysis pipeline.
//!
//! Every stage is a subcommand reading one JSON config; artifacts land
//! under `out/<run-id>/<stage>/` next to a machine-readable `run.json`.
//! Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

mod config;
mod runlog;
mod stages;

use clap::{Parser, Subcommand};
use config::Config;
use stages::StageCtx;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "envtrack",
    version,
    about = "EEG-based neural envelope tracking analysis pipeline"
)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the config's output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Override the run id (default: run-<seed>).
    #[arg(long, global = true)]
    run_id: Option<String>,

    /// Worker threads; results are independent of this.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort with known ground truth.
    Synth,
    /// Extract band envelopes from a speech WAV.
    Envelope,
    /// Preprocess raw EEG into band-filtered analysis-rate signals.
    Preprocess,
    /// Compute multivariate (and optionally single-channel) TMIFs.
    Tmif,
    /// Per-subject surrogate significance levels.
    Null,
    /// Group cluster-based permutation tests.
    Cluster,
    /// Nested leave-one-subject-out SVM classification.
    Classify,
    /// Classification and stability as a function of recording length.
    Duration,
    /// Split-half reliability with Fisher z group comparisons.
    Reliability,
    /// Between-band correlation matrices of mean MI.
    Bandcorr,
    /// Aggregate a run's stage outputs into one summary.
    Report,
}

impl Command {
    fn stage_name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Envelope => "envelope",
            Command::Preprocess => "preprocess",
            Command::Tmif => "tmif",
            Command::Null => "null",
            Command::Cluster => "cluster",
            Command::Classify => "classify",
            Command::Duration => "duration",
            Command::Reliability => "reliability",
            Command::Bandcorr => "bandcorr",
            Command::Report => "report",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let config_path = match &cli.config {
        Some(p) => p.clone(),
        None => {
            eprintln!("error: --config <file.json> is required");
            return ExitCode::from(2);
        }
    };
    let mut config = match Config::load(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(2);
        }
    };
    // flags override config
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out_dir) = cli.out_dir {
        config.out_dir = out_dir;
    }
    if let Some(run_id) = cli.run_id {
        config.run_id = Some(run_id);
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = Some(jobs);
    }

    let jobs = config.jobs.unwrap_or_else(num_cpus);
    if rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .is_err()
    {
        // pool already initialized (tests); results do not depend on it
    }

    let stage = cli.command.stage_name();
    let mut ctx = match StageCtx::new(config, stage, jobs) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    match stages::run_stage(stage, &mut ctx) {
        Ok(()) => match ctx.finish() {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error writing run log: {e:#}");
                ExitCode::from(1)
            }
        },
        Err(e) => {
            eprintln!("error: {e:#}");
            let msg = format!("{e:#}");
            if msg.contains("config section") || msg.contains("missing field") {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn num_cpus() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}
