//! Segmentation metrics, state-to-label matching and report aggregation.

pub mod hungarian;
pub mod metrics;
pub mod report;

pub use hungarian::{hungarian_assign, hungarian_square};
pub use metrics::*;
pub use report::{aggregate, evaluate_video, EvalReport, Metrics, TaskRow, VideoEval};

use crate::data::{FrameLabeling, Label};
use crate::error::Result;

/// Label for each of `n_states` predicted states maximizing pooled frame
/// accuracy against the references, over labels `Step(0..n_steps)` and
/// background. Extra states map to background.
pub fn state_label_mapping(
    predictions: &[(&[usize], &FrameLabeling)],
    n_states: usize,
    n_steps: usize,
) -> Result<Vec<Label>> {
    let mut m = AssignmentMatrix::new(n_states, n_steps + 1);
    for (states, reference) in predictions {
        let dense: Vec<usize> = reference.labels.iter().map(|l| l.dense_index(n_steps)).collect();
        m.add(states, &dense)?;
    }
    let (sigma, _) = hungarian_assign(&m.counts);
    Ok(sigma
        .into_iter()
        .map(|j| j.map_or(Label::Background, |j| Label::from_dense_index(j, n_steps)))
        .collect())
}
