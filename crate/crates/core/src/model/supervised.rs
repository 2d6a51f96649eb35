//! Closed-form generative fit from labelled videos.

use ndarray::{Array2, ArrayView2};

use crate::data::{FrameLabeling, Label};
use crate::error::{Error, Result};
use crate::model::params::ModelParams;

/// Labels that never occurred in the training data and so fell back to
/// smoothed structure and the global feature mean.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitReport {
    pub unseen_labels: Vec<Label>,
    pub regions: usize,
    pub frames: usize,
}

pub const DEFAULT_SMOOTHING: f64 = 0.1;

/// Fits initial, transition, duration and emission parameters from
/// sufficient statistics: first-region counts, bigram counts over maximal
/// label runs, mean run lengths and per-label feature means. Structural
/// counts get add-`smoothing` before normalization.
pub fn fit_supervised_generative(
    labels: &[Label],
    videos: &[(ArrayView2<f64>, &FrameLabeling)],
    variances: &[f64],
    smoothing: f64,
) -> Result<(ModelParams, FitReport)> {
    let n = labels.len();
    let dim = variances.len();
    if n == 0 {
        return Err(Error::Validation("no labels to fit".into()));
    }
    if smoothing < 0.0 {
        return Err(Error::Config(format!("negative smoothing {smoothing}")));
    }
    let slot = |l: Label| -> Result<usize> {
        labels
            .iter()
            .position(|&x| x == l)
            .ok_or_else(|| Error::Validation(format!("label {l} not in model")))
    };

    let mut init = vec![0.0; n];
    let mut trans = Array2::<f64>::zeros((n, n));
    let mut dur_sum = vec![0.0; n];
    let mut dur_count = vec![0.0; n];
    let mut frame_sum = Array2::<f64>::zeros((n, dim));
    let mut frame_count = vec![0.0; n];
    let mut global = vec![0.0; dim];
    let mut report = FitReport::default();

    for (x, frames) in videos {
        if x.nrows() != frames.len() {
            return Err(Error::Validation(format!(
                "{} feature rows but {} labels",
                x.nrows(),
                frames.len()
            )));
        }
        if x.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.ncols(),
            });
        }
        let seg = frames.to_segmentation();
        let slots: Vec<usize> = seg.regions.iter().map(|r| slot(r.label)).collect::<Result<_>>()?;
        if let Some(&first) = slots.first() {
            init[first] += 1.0;
        }
        for w in slots.windows(2) {
            trans[[w[0], w[1]]] += 1.0;
        }
        for (region, &k) in seg.regions.iter().zip(&slots) {
            dur_sum[k] += region.duration as f64;
            dur_count[k] += 1.0;
        }
        report.regions += slots.len();
        for (t, &l) in frames.labels.iter().enumerate() {
            let k = slot(l)?;
            frame_count[k] += 1.0;
            for f in 0..dim {
                frame_sum[[k, f]] += x[[t, f]];
                global[f] += x[[t, f]];
            }
        }
        report.frames += frames.len();
    }
    if report.frames == 0 {
        return Err(Error::Validation("no labelled frames to fit".into()));
    }
    for g in &mut global {
        *g /= report.frames as f64;
    }

    let init_log = normalize_counts(&init, smoothing);
    let mut trans_log = Array2::zeros((n, n));
    for i in 0..n {
        let row = normalize_counts(trans.row(i).as_slice().expect("standard layout"), smoothing);
        for (j, v) in row.into_iter().enumerate() {
            trans_log[[i, j]] = v;
        }
    }

    let total_regions: f64 = dur_count.iter().sum();
    let overall_duration = if total_regions > 0.0 {
        dur_sum.iter().sum::<f64>() / total_regions
    } else {
        1.0
    };
    let mut means = Array2::zeros((n, dim));
    let mut lambdas = vec![overall_duration; n];
    for k in 0..n {
        if dur_count[k] > 0.0 {
            lambdas[k] = dur_sum[k] / dur_count[k];
        }
        if frame_count[k] > 0.0 {
            for f in 0..dim {
                means[[k, f]] = frame_sum[[k, f]] / frame_count[k];
            }
        } else {
            report.unseen_labels.push(labels[k]);
            for f in 0..dim {
                means[[k, f]] = global[f];
            }
        }
    }

    let params = ModelParams::new(
        labels.to_vec(),
        init_log,
        trans_log,
        lambdas,
        means,
        variances.to_vec(),
    )?;
    Ok((params, report))
}

/// `log((c_i + k) / (sum c + n k))`; uniform when every count and `k` are zero.
fn normalize_counts(counts: &[f64], smoothing: f64) -> Vec<f64> {
    let total: f64 = counts.iter().sum::<f64>() + smoothing * counts.len() as f64;
    if total <= 0.0 {
        let u = -(counts.len() as f64).ln();
        return vec![u; counts.len()];
    }
    counts.iter().map(|&c| ((c + smoothing) / total).ln()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use Label::{Background as Bkg, Step};

    #[test]
    fn single_video_statistics() {
        let labels = vec![Step(0), Step(1), Bkg];
        let x = arr2(&[[1.0, 2.0], [3.0, 6.0], [-1.0, 0.0]]);
        let frames = FrameLabeling::new(vec![Step(0), Step(0), Step(1)]);
        let (p, report) =
            fit_supervised_generative(&labels, &[(x.view(), &frames)], &[1.0, 1.0], 0.1).unwrap();
        assert_eq!(p.lambdas[0], 2.0);
        assert_eq!(p.lambdas[1], 1.0);
        assert_eq!(p.means.row(0).to_vec(), vec![2.0, 4.0]);
        assert_eq!(p.means.row(1).to_vec(), vec![-1.0, 0.0]);
        assert!((p.trans_log[[0, 1]].exp() - 1.1 / 1.3).abs() < 1e-12);
        assert!((p.init_log[0].exp() - 1.1 / 1.3).abs() < 1e-12);
        assert_eq!(report.unseen_labels, vec![Bkg]);
        // Global mean fallback for the unseen label.
        assert!((p.means[[2, 0]] - 1.0).abs() < 1e-12);

        let (p0, _) =
            fit_supervised_generative(&labels, &[(x.view(), &frames)], &[1.0, 1.0], 0.0).unwrap();
        assert_eq!(p0.trans_log[[0, 1]], 0.0);
        assert_eq!(p0.trans_log[[0, 0]], f64::NEG_INFINITY);
    }

    #[test]
    fn duplicating_data_keeps_parameters() {
        let labels = vec![Step(0), Bkg];
        let x = arr2(&[[0.5], [1.5], [4.0], [4.5], [0.0]]);
        let frames = FrameLabeling::new(vec![Bkg, Step(0), Step(0), Bkg, Bkg]);
        let (once, _) = fit_supervised_generative(&labels, &[(x.view(), &frames)], &[1.0], 0.0).unwrap();
        let (twice, _) = fit_supervised_generative(
            &labels,
            &[(x.view(), &frames), (x.view(), &frames)],
            &[1.0],
            0.0,
        )
        .unwrap();
        assert_eq!(once.lambdas, twice.lambdas);
        assert_eq!(once.means, twice.means);
        for (a, b) in once.trans_log.iter().zip(twice.trans_log.iter()) {
            assert!(a == b || (a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_mismatched_lengths() {
        let labels = vec![Bkg];
        let x = arr2(&[[0.0], [1.0]]);
        let frames = FrameLabeling::new(vec![Bkg]);
        assert!(fit_supervised_generative(&labels, &[(x.view(), &frames)], &[1.0], 0.1).is_err());
    }
}
