mod common;

use common::*;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use stepseg::baselines::{ordered_uniform, predict_background};
use stepseg::eval::{all_frame_accuracy, hungarian_assign, sequence_similarity, step_frame_accuracy, step_recall};
use stepseg::synth::{synth_generate, SynthSpec};
use stepseg::{resolve_multilabel, run_experiment, Baseline, RunConfig};

#[test]
fn similarity_matches_edit_distance_oracle() {
    let mut r = rng(3);
    for _ in 0..300 {
        let a: Vec<u8> = (0..r.random_range(0..12)).map(|_| r.random_range(0..4)).collect();
        let b: Vec<u8> = (0..r.random_range(0..12)).map(|_| r.random_range(0..4)).collect();
        let max = a.len().max(b.len());
        let expected = if max == 0 {
            100.0
        } else {
            100.0 * (1.0 - edit_distance(&a, &b) as f64 / max as f64)
        };
        assert_eq!(sequence_similarity(&a, &b), expected);
    }
}

#[test]
fn hungarian_matches_permutation_search() {
    let mut r = rng(4);
    for _ in 0..200 {
        let m = Array2::from_shape_fn((6, 6), |_| r.random_range(0..50) as f64);
        let (sigma, padded) = hungarian_assign(&m);
        assert!(!padded);
        let total: f64 = sigma.iter().enumerate().map(|(i, j)| m[[i, j.unwrap()]]).sum();
        assert_eq!(total, best_permutation_total(&m));
    }
}

#[test]
fn rectangular_assignment_is_injective() {
    let mut r = rng(5);
    for (rows, cols) in [(3, 5), (5, 3), (1, 4), (4, 1)] {
        let m = Array2::from_shape_fn((rows, cols), |_| r.random_range(0..9) as f64);
        let (sigma, padded) = hungarian_assign(&m);
        assert!(padded);
        assert_eq!(sigma.len(), rows);
        let mut used: Vec<usize> = sigma.iter().flatten().copied().collect();
        assert_eq!(used.len(), rows.min(cols));
        used.sort();
        used.dedup();
        assert_eq!(used.len(), rows.min(cols));
    }
}

#[test]
fn background_baseline_identities() {
    let out = synth_generate(&SynthSpec {
        videos_per_task: 15,
        tasks: 2,
        seed: 9,
        ..SynthSpec::default()
    })
    .unwrap();
    for v in &out.dataset.videos {
        let task = out.dataset.task(&v.task_id).unwrap();
        let reference = resolve_multilabel(v, task).unwrap();
        let pred = predict_background(v.len());
        let bkg = reference.labels.iter().filter(|l| l.is_background()).count() as f64 / v.len() as f64;
        assert_eq!(all_frame_accuracy(&pred, &reference).unwrap(), bkg);
        assert!(matches!(step_frame_accuracy(&pred, &reference).unwrap(), None | Some(0.0)));
        assert!(matches!(step_recall(&pred, &reference).unwrap(), None | Some(0.0)));
    }
    let report = run_experiment(
        &out.dataset,
        &RunConfig {
            mode: None,
            baseline: Some(Baseline::Bkg),
            ..RunConfig::default()
        },
    )
    .unwrap();
    assert_eq!(report.report.average.background_pct, Some(100.0));
    assert_eq!(report.report.average.step_recall, Some(0.0));
}

proptest! {
    #[test]
    fn similarity_bounds(a in proptest::collection::vec(0u8..5, 0..15), b in proptest::collection::vec(0u8..5, 0..15)) {
        let s = sequence_similarity(&a, &b);
        prop_assert!((0.0..=100.0).contains(&s));
        prop_assert_eq!(s, sequence_similarity(&b, &a));
        prop_assert_eq!(sequence_similarity(&a, &a), 100.0);
    }

    #[test]
    fn uniform_baseline_covers_video(steps in 1usize..8, extra in 0usize..200, bg in 0.0f64..1.0) {
        let t = steps + extra;
        let seg = ordered_uniform(steps, t, bg).unwrap();
        prop_assert_eq!(seg.len(), t);
        let order: Vec<usize> = seg.regions.iter().filter_map(|r| r.label.step()).collect();
        prop_assert_eq!(order, (0..steps).collect::<Vec<_>>());
    }
}
