mod common;

use common::*;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use stepseg::model::{
    forward_log_marginal, objective_and_gradient, viterbi_decode, DurationConfig, FinalRegion, Lattice, Objective,
    RawParams, TrainItem,
};
use stepseg::Segmentation;

fn check_instance(seed: u64, final_region: FinalRegion) {
    let mut r = rng(seed);
    let t = r.random_range(1..=7);
    let n = r.random_range(1..=3);
    let d = r.random_range(1..=4);
    let p = random_params(&mut r, n, 2, fixed(d, final_region));
    let x = random_features(&mut r, t, 2);
    let (log_z, best, best_score) = brute_force(&p, x.view(), d);
    let lz = forward_log_marginal(&p, x.view(), None).unwrap();
    assert!((lz - log_z).abs() < 1e-9, "seed {seed}: {lz} vs {log_z}");
    let (seg, score) = viterbi_decode(&p, x.view(), None).unwrap();
    assert_eq!(pairs(&seg), best, "seed {seed}");
    assert!((score - best_score).abs() < 1e-9);
}

#[test]
fn forward_and_viterbi_match_enumeration() {
    for seed in 0..40 {
        check_instance(seed, FinalRegion::Pmf);
    }
}

#[test]
fn survival_final_region_matches_enumeration() {
    for seed in 100..120 {
        check_instance(seed, FinalRegion::Survival);
    }
}

#[test]
fn expected_occupancy_matches_enumeration() {
    let mut r = rng(7);
    let p = random_params(&mut r, 3, 2, fixed(3, FinalRegion::Pmf));
    let x = random_features(&mut r, 5, 2);
    let segs = all_segmentations(5, 3, 3);
    let scores: Vec<f64> = segs.iter().map(|s| joint(&p, s, x.view(), 3)).collect();
    let z = log_sum(&scores);
    let mut occ = Array2::<f64>::zeros((5, 3));
    let mut trans = Array2::<f64>::zeros((3, 3));
    for (s, lp) in segs.iter().zip(&scores) {
        let w = (lp - z).exp();
        let mut t = 0;
        for (i, &(k, d)) in s.iter().enumerate() {
            for u in t..t + d {
                occ[[u, k]] += w;
            }
            if i > 0 {
                trans[[s[i - 1].0, k]] += w;
            }
            t += d;
        }
    }
    let counts = Lattice::new(&p, x.view(), None).unwrap().expected_counts();
    for t in 0..5 {
        for k in 0..3 {
            assert!((counts.occupancy[t * 3 + k] - occ[[t, k]]).abs() < 1e-9);
        }
    }
    for a in 0..3 {
        for b in 0..3 {
            assert!((counts.trans[a * 3 + b] - trans[[a, b]]).abs() < 1e-9);
        }
    }
}

#[test]
fn hmm_ablation_matches_classic_hmm() {
    for seed in 0..30 {
        let mut r = rng(1000 + seed);
        let t = r.random_range(1..=20);
        let n = r.random_range(1..=4);
        let p = random_params(&mut r, n, 3, DurationConfig::hmm());
        let x = random_features(&mut r, t, 3);
        let lz = forward_log_marginal(&p, x.view(), None).unwrap();
        assert!((lz - hmm_forward(&p, x.view())).abs() < 1e-9);
        let (seg, score) = viterbi_decode(&p, x.view(), None).unwrap();
        let (path, best) = hmm_viterbi(&p, x.view());
        assert_eq!(seg.to_frames().labels, path);
        assert!((score - best).abs() < 1e-9);
    }
}

fn finite_difference_check(objective: Objective, seed: u64) {
    let mut r = rng(seed);
    let p = random_params(&mut r, 2, 2, fixed(3, FinalRegion::Pmf));
    let x = random_features(&mut r, 5, 2);
    let reference = Segmentation::from_pairs(&[(0usize, 2), (1, 3)]).unwrap();
    let items = [TrainItem::new("v", x.view()).with_reference(reference)];
    let raw = RawParams::from_params(&p);
    let (_, grad) = objective_and_gradient(&p, &raw, &items, objective).unwrap();
    let analytic = grad.to_vec();
    let base = raw.to_vec();
    let h = 1e-5;
    for i in 0..base.len() {
        let eval = |delta: f64| {
            let mut v = base.clone();
            v[i] += delta;
            let mut q = raw.clone();
            q.set_from_slice(&v);
            objective_and_gradient(&p, &q, &items, objective).unwrap().0
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        let scale = fd.abs().max(analytic[i].abs()).max(1e-4);
        assert!(
            (fd - analytic[i]).abs() / scale < 1e-3,
            "{objective:?} coordinate {i}: analytic {} vs numeric {fd}",
            analytic[i]
        );
    }
}

#[test]
fn marginal_gradient_matches_finite_differences() {
    for seed in 0..3 {
        finite_difference_check(Objective::Marginal, seed);
    }
}

#[test]
fn conditional_gradient_matches_finite_differences() {
    for seed in 0..3 {
        finite_difference_check(Objective::Conditional, seed);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn viterbi_score_bounded_by_marginal(seed in 0u64..10_000, t in 1usize..30, n in 1usize..5) {
        let mut r = rng(seed);
        let p = random_params(&mut r, n, 2, DurationConfig::default());
        let x = random_features(&mut r, t, 2);
        let lattice = Lattice::new(&p, x.view(), None).unwrap();
        let (seg, score) = lattice.viterbi().unwrap();
        prop_assert_eq!(seg.len(), t);
        prop_assert!(score <= lattice.log_marginal() + 1e-9);
        prop_assert!((lattice.score(&seg).unwrap() - score).abs() < 1e-8);
    }

    #[test]
    fn occupancy_rows_sum_to_one(seed in 0u64..10_000, t in 1usize..25, n in 1usize..4) {
        let mut r = rng(seed);
        let p = random_params(&mut r, n, 2, DurationConfig::default());
        let x = random_features(&mut r, t, 2);
        let c = Lattice::new(&p, x.view(), None).unwrap().expected_counts();
        for u in 0..t {
            let s: f64 = c.occupancy[u * n..(u + 1) * n].iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
    }
}
