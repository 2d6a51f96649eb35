//! `stepseg` command-line interface.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "stepseg", version, about = "Weakly supervised step segmentation with hidden semi-Markov models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a dataset manifest and its feature files.
    Validate {
        manifest: PathBuf,
    },
    /// Fit per-task PCA projections on the training videos.
    Pca {
        #[arg(long)]
        manifest: PathBuf,
        /// Feature group as NAME:DIM:COMPONENTS, in column order.
        #[arg(long = "group", required = true)]
        groups: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model per task and save the bundle.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode videos with a saved model.
    Predict {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Decode every video instead of the evaluation split.
        #[arg(long)]
        all: bool,
        /// Apply narration constraints while decoding.
        #[arg(long)]
        narration: bool,
        #[arg(long, allow_hyphen_values = true)]
        narration_penalty: Option<f64>,
    },
    /// Score predictions against the manifest's annotations.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Match predicted labels to reference labels one-to-one first.
        #[arg(long)]
        hungarian: bool,
        /// Report file (JSON lines); a text table is written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        tasks: usize,
        #[arg(long, default_value_t = 3)]
        steps: usize,
        #[arg(long, default_value_t = 50)]
        videos: usize,
        #[arg(long, default_value_t = 40)]
        min_len: usize,
        #[arg(long, default_value_t = 80)]
        max_len: usize,
        #[arg(long, default_value_t = 5.0)]
        separation: f64,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 0.5)]
        background: f64,
        #[arg(long, default_value_t = 8.0)]
        step_duration: f64,
        #[arg(long)]
        ordered: bool,
        #[arg(long)]
        narration: bool,
        #[arg(long, default_value_t = 5)]
        narration_slack: usize,
        /// Tag this many videos per task as training and the rest as test.
        #[arg(long)]
        train_per_task: Option<usize>,
    },
    /// Draw segmentation timelines as SVG, one file per video.
    Viz {
        #[arg(long)]
        manifest: PathBuf,
        /// Prediction files, one timeline row each.
        #[arg(long = "predictions")]
        predictions: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Only these videos.
        #[arg(long = "video")]
        videos: Vec<String>,
        /// Timesteps per second.
        #[arg(long, default_value_t = 1.0)]
        fps: f64,
    },
    /// Train or run a baseline, decode, and evaluate end to end.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Directory for predictions, model and report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Repeat over this many random train/test splits and average.
        #[arg(long)]
        splits: Option<usize>,
        #[arg(long, requires = "splits")]
        train_per_task: Option<usize>,
    },
}

/// Flags mirroring the run configuration. Flags that are given override
/// values from `--config`.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON run configuration to start from.
    #[arg(long)]
    config: Option<PathBuf>,
    /// unsup, gen-sup or disc-sup.
    #[arg(long, conflicts_with = "baseline")]
    mode: Option<String>,
    /// bkg, sample or uniform.
    #[arg(long)]
    baseline: Option<String>,
    /// none, ord, narr or ord+narr.
    #[arg(long)]
    constraints: Option<String>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Feature group as NAME:DIM:COMPONENTS; enables PCA.
    #[arg(long = "group")]
    groups: Vec<String>,
    #[arg(long)]
    smoothing: Option<f64>,
    #[arg(long)]
    variance_floor: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    narration_penalty: Option<f64>,
    #[arg(long)]
    narration_at_test: bool,
    #[arg(long)]
    background_fraction: Option<f64>,
    /// Fixed maximum region duration instead of the automatic limit.
    #[arg(long)]
    max_duration: Option<usize>,
    /// Fix every duration to one timestep (plain HMM).
    #[arg(long)]
    hmm: bool,
    /// Score the final region with the survival function.
    #[arg(long)]
    survival_final: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            match e.downcast_ref::<stepseg::Error>() {
                Some(inner) => eprintln!("error: {inner}"),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
