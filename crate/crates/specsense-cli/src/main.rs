//! `specsense`: spectrum occupancy sensing and interference modeling.
//!
//! Subcommands mirror the pipeline stages: `calibrate` a noise capture and
//! pick a detection threshold, `sense` a capture into frames and occupancy,
//! `model` the sensed occupancy, `simulate` synthetic captures with ground
//! truth, and `roc` for closed-loop ROC extraction.

mod commands;
mod config;
mod errors;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::AppConfig;
use errors::{config_err, CmdResult};

#[derive(Parser)]
#[command(name = "specsense", version, about = "IoT-band spectrum occupancy sensing toolkit")]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the noise floor from a terminated-input capture and pick
    /// the detection threshold for a target false-alarm probability.
    Calibrate {
        /// Noise capture: binary spectrogram (.psd) or PSD sample CSV
        /// (dBm/Hz, one per line).
        #[arg(long)]
        input: PathBuf,
        /// Target false-alarm probability (default from config).
        #[arg(long)]
        pfa: Option<f64>,
        /// Output directory.
        #[arg(long, default_value = "calibration")]
        out: PathBuf,
    },
    /// Detect frames in a capture: spectrogram, binarize, cluster,
    /// reinforce, duty cycle.
    Sense {
        /// Capture: raw IQ (.iq, with .iq.toml sidecar) or binary
        /// spectrogram (.psd).
        #[arg(long)]
        input: PathBuf,
        /// Calibration CSV written by `calibrate`.
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Threshold in dBm/Hz (bypasses the calibration quantile).
        #[arg(long)]
        theta_dbm: Option<f64>,
        /// Target false-alarm probability (with --calibration).
        #[arg(long)]
        pfa: Option<f64>,
        /// Frequency scaling factor for clustering.
        #[arg(long)]
        delta: Option<f64>,
        /// Process the capture in blocks of this many rows (0 = whole
        /// capture), merging frames across adjacent block boundaries.
        #[arg(long)]
        block_rows: Option<usize>,
        /// Ground-truth frame CSV for closed-loop scoring.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value = "sense")]
        out: PathBuf,
    },
    /// Fit the temporal CTMC and Poisson traffic models from sense outputs.
    Model {
        /// Directory produced by `sense` (needs o_grid.bin and frames.json).
        #[arg(long)]
        sense_dir: PathBuf,
        #[arg(long, default_value = "model")]
        out: PathBuf,
    },
    /// Generate a synthetic capture with ground truth.
    Simulate {
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Re-run from a previous run's manifest (uses its config snapshot).
        #[arg(long)]
        from_manifest: Option<PathBuf>,
        #[arg(long, default_value = "simulate")]
        out: PathBuf,
    },
    /// Sweep thresholds over synthetic captures and emit ROC curves for
    /// energy detection and the clustering framework.
    Roc {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        from_manifest: Option<PathBuf>,
        #[arg(long, default_value = "roc")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CmdResult<()> {
    let config = AppConfig::load(cli.config.as_deref()).map_err(config_err)?;
    match cli.command {
        Command::Calibrate { input, pfa, out } => {
            commands::calibrate::run(&config, &input, pfa, &out)
        }
        Command::Sense {
            input,
            calibration,
            theta_dbm,
            pfa,
            delta,
            block_rows,
            truth,
            out,
        } => commands::sense::run(commands::sense::Args {
            config,
            input,
            calibration,
            theta_dbm,
            pfa,
            delta,
            block_rows,
            truth,
            out,
        }),
        Command::Model { sense_dir, out } => commands::model::run(&config, &sense_dir, &out),
        Command::Simulate { seed, from_manifest, out } => {
            commands::simulate::run(config, seed, from_manifest.as_deref(), &out)
        }
        Command::Roc { seed, from_manifest, out } => {
            commands::roc::run(config, seed, from_manifest.as_deref(), &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
