//! Feature-agnostic baselines built from training label statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FrameLabeling, Label, Region, Segmentation};
use crate::error::{Error, Result};
use crate::model::sample::draw_log_categorical;

/// Frame label distribution of one task's training videos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStats {
    pub n_steps: usize,
    /// Indexed by [`Label::dense_index`]: steps, then background.
    pub distribution: Vec<f64>,
    pub background_fraction: f64,
}

impl TaskStats {
    pub fn from_frames<'a>(n_steps: usize, videos: impl IntoIterator<Item = &'a FrameLabeling>) -> Result<Self> {
        let mut counts = vec![0.0; n_steps + 1];
        for frames in videos {
            for &l in &frames.labels {
                if let Label::Step(j) = l {
                    if j >= n_steps {
                        return Err(Error::Validation(format!("step {j} outside task of {n_steps} steps")));
                    }
                }
                counts[l.dense_index(n_steps)] += 1.0;
            }
        }
        let total: f64 = counts.iter().sum();
        if total == 0.0 {
            return Err(Error::Validation("no training frames".into()));
        }
        let distribution: Vec<f64> = counts.iter().map(|c| c / total).collect();
        Ok(TaskStats {
            n_steps,
            background_fraction: distribution[n_steps],
            distribution,
        })
    }
}

pub fn predict_background(t_len: usize) -> FrameLabeling {
    FrameLabeling::background(t_len)
}

/// Independent per-timestep draws from the task's label distribution.
pub fn sample_from_train(stats: &TaskStats, t_len: usize, seed: u64) -> FrameLabeling {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logw: Vec<f64> = stats.distribution.iter().map(|p| p.ln()).collect();
    let labels = (0..t_len)
        .map(|_| {
            let k = draw_log_categorical(&mut rng, &logw).unwrap_or(stats.n_steps);
            Label::from_dense_index(k, stats.n_steps)
        })
        .collect();
    FrameLabeling::new(labels)
}

/// `n` split into `parts` near-equal integers, larger ones first.
fn split_evenly(n: usize, parts: usize) -> Vec<usize> {
    let base = n / parts;
    let extra = n % parts;
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

/// Every step once in canonical order, with equal step durations and the
/// remaining time spread evenly over the `S + 1` background gaps.
///
/// Step time is `round((1 - bg_fraction) * T)`, raised to `S` when smaller.
pub fn ordered_uniform(n_steps: usize, t_len: usize, bg_fraction: f64) -> Result<Segmentation> {
    if n_steps == 0 {
        return Err(Error::Validation("task has no steps".into()));
    }
    if t_len < n_steps {
        return Err(Error::Infeasible(format!(
            "{t_len} timesteps cannot hold {n_steps} step regions"
        )));
    }
    if !(0.0..=1.0).contains(&bg_fraction) {
        return Err(Error::Config(format!("background fraction {bg_fraction} outside [0, 1]")));
    }
    let step_time = (((1.0 - bg_fraction) * t_len as f64).round() as usize).clamp(n_steps, t_len);
    let steps = split_evenly(step_time, n_steps);
    let gaps = split_evenly(t_len - step_time, n_steps + 1);
    let mut regions = Vec::with_capacity(2 * n_steps + 1);
    for j in 0..n_steps {
        if gaps[j] > 0 {
            regions.push(Region::new(Label::Background, gaps[j]));
        }
        regions.push(Region::new(Label::Step(j), steps[j]));
    }
    if gaps[n_steps] > 0 {
        regions.push(Region::new(Label::Background, gaps[n_steps]));
    }
    Segmentation::with_length(regions, t_len)
}
