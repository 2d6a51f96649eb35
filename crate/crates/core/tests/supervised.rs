mod common;

use common::*;
use ndarray::Array2;
use rand::Rng;
use stepseg::model::{fit_supervised_generative, sample};
use stepseg::synth::{synth_generate, SynthSpec};
use stepseg::{FrameLabeling, Label};

#[test]
fn fit_equals_hand_computed_statistics() {
    let mut r = rng(11);
    let labels = labels(3);
    let mut videos = Vec::new();
    for _ in 0..6 {
        let t = r.random_range(5..30);
        let mut frames = Vec::with_capacity(t);
        while frames.len() < t {
            let l = labels[r.random_range(0..3)];
            for _ in 0..r.random_range(1..5) {
                frames.push(l);
            }
        }
        frames.truncate(t);
        videos.push((random_features(&mut r, t, 2), FrameLabeling::new(frames)));
    }
    let views: Vec<_> = videos.iter().map(|(x, f)| (x.view(), f)).collect();
    let (p, _) = fit_supervised_generative(&labels, &views, &[1.0, 1.0], 0.0).unwrap();

    let mut sum = Array2::<f64>::zeros((3, 2));
    let mut frames = [0.0; 3];
    let mut run_total = [0.0; 3];
    let mut runs = [0.0; 3];
    let mut bigram = Array2::<f64>::zeros((3, 3));
    for (x, f) in &videos {
        let idx: Vec<usize> = f.labels.iter().map(|l| labels.iter().position(|m| m == l).unwrap()).collect();
        for (t, &k) in idx.iter().enumerate() {
            frames[k] += 1.0;
            sum[[k, 0]] += x[[t, 0]];
            sum[[k, 1]] += x[[t, 1]];
        }
        let mut start = 0;
        let mut prev: Option<usize> = None;
        for t in 1..=idx.len() {
            if t == idx.len() || idx[t] != idx[start] {
                let k = idx[start];
                run_total[k] += (t - start) as f64;
                runs[k] += 1.0;
                if let Some(j) = prev {
                    bigram[[j, k]] += 1.0;
                }
                prev = Some(k);
                start = t;
            }
        }
    }
    for k in 0..3 {
        if frames[k] > 0.0 {
            for f in 0..2 {
                assert!((p.means[[k, f]] - sum[[k, f]] / frames[k]).abs() < 1e-12);
            }
        }
        if runs[k] > 0.0 {
            assert!((p.lambdas[k] - run_total[k] / runs[k]).abs() < 1e-12);
        }
        let row: f64 = bigram.row(k).sum();
        if row > 0.0 {
            for j in 0..3 {
                assert!((p.trans_log[[k, j]].exp() - bigram[[k, j]] / row).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn refit_on_own_samples_recovers_parameters() {
    let truth = synth_generate(&SynthSpec {
        videos_per_task: 1,
        seed: 2,
        ..SynthSpec::default()
    })
    .unwrap()
    .truth
    .remove("task00")
    .unwrap();
    let data: Vec<(Array2<f64>, FrameLabeling)> = (0..20)
        .map(|i| {
            let (seg, x) = sample(&truth, 2000, 500 + i);
            (x, seg.map(|s| truth.state_label(s)).to_frames())
        })
        .collect();
    let views: Vec<_> = data.iter().map(|(x, f)| (x.view(), f)).collect();
    let (fit, _) = fit_supervised_generative(&truth.labels, &views, &truth.variances, 0.0).unwrap();

    let n = truth.n_slots();
    let mut frames = vec![0.0; n];
    let mut regions = vec![0.0; n];
    for (_, f) in &data {
        for l in &f.labels {
            frames[truth.slot_of(*l).unwrap()] += 1.0;
        }
        for r in &f.to_segmentation().regions {
            regions[truth.slot_of(r.label).unwrap()] += 1.0;
        }
    }
    for k in 0..n {
        for f in 0..truth.dim() {
            let se = (truth.variances[f] / frames[k]).sqrt();
            let err = (fit.means[[k, f]] - truth.means[[k, f]]).abs();
            assert!(err < 3.0 * se, "mean {k},{f}: error {err} vs se {se}");
        }
        let lambda = truth.lambdas[k];
        let se = (lambda / regions[k]).sqrt();
        let err = (fit.lambdas[k] - lambda).abs();
        assert!(err < 3.0 * se, "lambda {k}: error {err} vs se {se}");
        let outgoing = regions[k];
        for j in 0..n {
            let p = truth.trans_log[[k, j]].exp();
            if p == 0.0 {
                assert_eq!(fit.trans_log[[k, j]], f64::NEG_INFINITY);
                continue;
            }
            let se = (p * (1.0 - p) / outgoing).sqrt();
            let err = (fit.trans_log[[k, j]].exp() - p).abs();
            assert!(err <= 3.0 * se + 1e-12, "transition {k}->{j}: error {err} vs se {se}");
        }
    }
    assert_eq!(fit.labels, vec![Label::Step(0), Label::Step(1), Label::Step(2), Label::Background]);
}
