//! Weakly supervised action segmentation with a hidden semi-Markov model.

pub mod baselines;
pub mod constraints;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod io;
pub mod logspace;
pub mod synth;
pub mod viz;
pub mod model;

pub use baselines::*;
pub use constraints::*;
pub use data::*;
pub use error::{Error, Result};
pub use eval::{aggregate, evaluate_video, EvalReport, Metrics};
pub use experiment::{
    evaluate_predictions, hungarian_relabel, predict_baseline, predict_with_models, run_experiment, run_splits,
    train_models, Baseline, Constraints, DecodeOptions, Mode, RunConfig, RunOutput,
};
pub use features::*;
pub use model::*;
