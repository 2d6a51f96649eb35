pub mod lattice;
pub mod params;
pub mod sample;
pub mod supervised;
pub mod train;

pub use lattice::{forward_log_marginal, log_joint, viterbi_decode, Counts, EmissionMask, Forward, Lattice};
pub use params::{
    DurationConfig, DurationLimit, DurationMode, FinalRegion, ModelParams, StateSpace, StateStructure,
};
pub use sample::{expected_occupancy, sample, sample_segmentation};
pub use supervised::{fit_supervised_generative, FitReport, DEFAULT_SMOOTHING};
pub use train::{
    objective_and_gradient, objective_value, random_init, train, train_discriminative, train_unsupervised, Objective,
    RawParams, TrainConfig, TrainItem,
    TrainOutcome,
};
