//! `tseg`: timestamp-supervised temporal action segmentation from the
//! command line. Subcommands cover the whole pipeline: synthetic data
//! generation, pseudo-label ensembling, encoder training with iterative
//! clustering, checkpoint evaluation, and scoring of precomputed labels.

mod commands;
mod config;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "tseg", version, about = "Timestamp-supervised temporal action segmentation")]
struct Cli {
    /// Flat key-value configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for generation, initialization, and shuffling.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Dataset manifest path.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset and print its manifest path.
    Synth,
    /// Precompute ensembled pseudo-labels and the quality table.
    Ple {
        /// Also evaluate the variant that fills ambiguous intervals with the
        /// boundary energy objective.
        #[arg(long)]
        fill_energy: bool,
    },
    /// Train the encoder: warmup then iterative clustering.
    Train,
    /// Evaluate a checkpoint: argmax predictions plus all metrics.
    Eval {
        /// Checkpoint path (overrides the config key).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Score precomputed label files against the manifest's ground truth.
    Report {
        /// Directory of <video-id>.txt label files (overrides the config key).
        #[arg(long)]
        pred: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    // thread count comes from the environment only
    if let Ok(threads) = std::env::var("TSEG_THREADS") {
        let threads: usize = threads
            .parse()
            .context("TSEG_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("initializing the thread pool")?;
    }

    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(manifest) = cli.manifest {
        cfg.manifest = Some(manifest);
    }

    match cli.command {
        Command::Synth => commands::cmd_synth(&cfg),
        Command::Ple { fill_energy } => commands::cmd_ple(&cfg, fill_energy),
        Command::Train => commands::cmd_train(&cfg),
        Command::Eval { checkpoint } => commands::cmd_eval(&cfg, checkpoint.as_deref()),
        Command::Report { pred } => commands::cmd_report(&cfg, pred.as_deref()),
    }
}
