use std::collections::BTreeMap;

use ndarray::Array2;

use crate::data::{FrameLabeling, Label, Segmentation};
use crate::error::{Error, Result};

fn check_lengths(pred: &FrameLabeling, reference: &FrameLabeling) -> Result<()> {
    if pred.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            found: pred.len(),
        });
    }
    Ok(())
}

/// `(correct, total)` over every timestep.
pub fn frame_matches(pred: &FrameLabeling, reference: &FrameLabeling) -> Result<(usize, usize)> {
    check_lengths(pred, reference)?;
    let correct = pred.labels.iter().zip(&reference.labels).filter(|(a, b)| a == b).count();
    Ok((correct, pred.len()))
}

/// `(correct, total)` over timesteps whose reference is a step.
pub fn step_frame_matches(pred: &FrameLabeling, reference: &FrameLabeling) -> Result<(usize, usize)> {
    check_lengths(pred, reference)?;
    let mut correct = 0;
    let mut total = 0;
    for (p, r) in pred.labels.iter().zip(&reference.labels) {
        if !r.is_background() {
            total += 1;
            correct += usize::from(p == r);
        }
    }
    Ok((correct, total))
}

pub fn all_frame_accuracy(pred: &FrameLabeling, reference: &FrameLabeling) -> Result<f64> {
    let (c, n) = frame_matches(pred, reference)?;
    Ok(if n == 0 { 0.0 } else { c as f64 / n as f64 })
}

/// `None` when the reference has no step frames.
pub fn step_frame_accuracy(pred: &FrameLabeling, reference: &FrameLabeling) -> Result<Option<f64>> {
    let (c, n) = step_frame_matches(pred, reference)?;
    Ok((n > 0).then(|| c as f64 / n as f64))
}

/// Representative frame of each predicted step type: the predicted frame
/// of that type nearest to `floor((first + last) / 2)`, earlier on ties.
pub fn representative_frames(pred: &FrameLabeling) -> BTreeMap<usize, usize> {
    let mut frames: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (t, l) in pred.labels.iter().enumerate() {
        if let Label::Step(j) = l {
            frames.entry(*j).or_default().push(t);
        }
    }
    frames
        .into_iter()
        .map(|(j, ts)| {
            let mid = (ts[0] + ts[ts.len() - 1]) / 2;
            let best = *ts
                .iter()
                .min_by_key(|&&t| (t.abs_diff(mid), t))
                .expect("non-empty");
            (j, best)
        })
        .collect()
}

/// `(recovered, present)`: step types in the reference, and those whose
/// representative predicted frame carries the same type in the reference.
pub fn step_recall_counts(pred: &FrameLabeling, reference: &FrameLabeling) -> Result<(usize, usize)> {
    check_lengths(pred, reference)?;
    let present = crate::data::step_types(&reference.labels);
    let recovered = representative_frames(pred)
        .into_iter()
        .filter(|&(j, t)| reference.labels[t] == Label::Step(j))
        .count();
    Ok((recovered, present.len()))
}

pub fn step_recall(pred: &FrameLabeling, reference: &FrameLabeling) -> Result<Option<f64>> {
    let (r, n) = step_recall_counts(pred, reference)?;
    Ok((n > 0).then(|| r as f64 / n as f64))
}

pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `100 * (1 - dist / max(len))`; two empty sequences score 100.
pub fn sequence_similarity<T: PartialEq>(pred: &[T], reference: &[T]) -> f64 {
    let max = pred.len().max(reference.len());
    if max == 0 {
        return 100.0;
    }
    100.0 * (1.0 - levenshtein(pred, reference) as f64 / max as f64)
}

pub fn segmentation_similarity(pred: &Segmentation, reference: &Segmentation) -> f64 {
    sequence_similarity(&pred.labels(), &reference.labels())
}

pub fn background_pct(pred: &FrameLabeling) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let bkg = pred.labels.iter().filter(|l| l.is_background()).count();
    100.0 * bkg as f64 / pred.len() as f64
}

/// Non-background regions after merging equal neighbours.
pub fn num_step_segments(pred: &Segmentation) -> usize {
    pred.coalesce().regions.iter().filter(|r| !r.label.is_background()).count()
}

/// `m[i, j]`: frames where state `i` is predicted and label `j` is the
/// reference.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix {
    pub counts: Array2<f64>,
}

impl AssignmentMatrix {
    pub fn new(states: usize, labels: usize) -> Self {
        AssignmentMatrix {
            counts: Array2::zeros((states, labels)),
        }
    }

    pub fn add(&mut self, predicted: &[usize], reference: &[usize]) -> Result<()> {
        if predicted.len() != reference.len() {
            return Err(Error::DimensionMismatch {
                expected: reference.len(),
                found: predicted.len(),
            });
        }
        let (s, l) = self.counts.dim();
        for (&p, &r) in predicted.iter().zip(reference) {
            if p >= s || r >= l {
                return Err(Error::Validation(format!("state {p} or label {r} outside {s} x {l}")));
            }
            self.counts[[p, r]] += 1.0;
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.counts.sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Background as Bkg, Step};

    fn frames(v: &[Label]) -> FrameLabeling {
        FrameLabeling::new(v.to_vec())
    }

    #[test]
    fn step_accuracy_example() {
        let r = frames(&[Bkg, Step(0), Step(1)]);
        let p = frames(&[Step(0), Step(0), Step(0)]);
        assert_eq!(step_frame_accuracy(&p, &r).unwrap(), Some(0.5));
        assert_eq!(step_frame_accuracy(&r, &r).unwrap(), Some(1.0));
        assert_eq!(step_frame_accuracy(&FrameLabeling::background(3), &r).unwrap(), Some(0.0));
        assert!(all_frame_accuracy(&frames(&[Bkg]), &r).is_err());
    }

    #[test]
    fn accuracy_extremes() {
        let r = frames(&[Step(0), Step(1)]);
        assert_eq!(all_frame_accuracy(&r, &r).unwrap(), 1.0);
        assert_eq!(all_frame_accuracy(&frames(&[Step(1), Bkg]), &r).unwrap(), 0.0);
    }

    #[test]
    fn recall_midpoint() {
        let mut p = vec![Bkg; 8];
        p[3..6].fill(Step(0));
        let mut r = vec![Bkg; 8];
        r[4] = Step(0);
        assert_eq!(representative_frames(&frames(&p))[&0], 4);
        assert_eq!(step_recall(&frames(&p), &frames(&r)).unwrap(), Some(1.0));
        assert_eq!(step_recall(&FrameLabeling::background(8), &frames(&r)).unwrap(), Some(0.0));
    }

    #[test]
    fn recall_midpoint_ties_go_early() {
        // Frames {0, 1, 6, 7}: midpoint floor(7/2) = 3, nearest frames 1 (dist 2)
        // and none at dist 2 on the right (6 is dist 3).
        let mut p = vec![Bkg; 8];
        for t in [0, 1, 6, 7] {
            p[t] = Step(0);
        }
        assert_eq!(representative_frames(&frames(&p))[&0], 1);
        // Frames {2, 4}: midpoint 3, both at distance 1, earlier wins.
        let mut q = vec![Bkg; 8];
        q[2] = Step(1);
        q[4] = Step(1);
        assert_eq!(representative_frames(&frames(&q))[&1], 2);
    }

    #[test]
    fn similarity_examples() {
        let a = ["A", "B"];
        let b = ["A", "C", "B"];
        assert!((sequence_similarity(&a, &b) - 200.0 / 3.0).abs() < 1e-9);
        assert_eq!(sequence_similarity(&a, &a), 100.0);
        assert_eq!(sequence_similarity(&["x", "y"], &["z", "w"]), 0.0);
        let empty: [&str; 0] = [];
        assert_eq!(sequence_similarity(&empty, &empty), 100.0);
    }

    #[test]
    fn background_and_segments() {
        assert_eq!(background_pct(&FrameLabeling::background(4)), 100.0);
        assert_eq!(background_pct(&frames(&[Step(0), Step(1)])), 0.0);
        let f = frames(&[Bkg, Step(0), Step(0), Bkg, Step(1)]);
        assert_eq!(num_step_segments(&f.to_segmentation()), 2);
        assert_eq!(num_step_segments(&FrameLabeling::background(3).to_segmentation()), 0);
    }
}
