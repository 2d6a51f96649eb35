//! Persistence: dataset manifests, feature files, models, predictions and
//! reports.

pub mod features;
pub mod manifest;
pub mod model;
pub mod predictions;

pub use features::{read_features, write_features, write_features_as, DType, FeatureHeader};
pub use manifest::{load_dataset, load_unvalidated, read_manifest, save_dataset, DatasetManifest, VideoRecord};
pub use model::{load_model, save_model, ModelBundle, ParamsRecord, TaskModel};
pub use predictions::{
    load_predictions, save_predictions, write_report, PredictionFile, PredictionRecord, RunMetadata,
};
