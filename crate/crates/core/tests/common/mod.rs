//! Test-side oracles written independently of the library internals.
#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use stepseg::model::{DurationConfig, DurationLimit, FinalRegion, ModelParams};
use stepseg::{Label, Segmentation};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn log_normalize(v: &mut [f64]) {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z = m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    for x in v {
        *x -= z;
    }
}

pub fn labels(n: usize) -> Vec<Label> {
    let mut l: Vec<Label> = (0..n - 1).map(Label::Step).collect();
    l.push(Label::Background);
    l
}

/// Random fully connected model with `n` labels and feature dimension `dim`.
pub fn random_params(r: &mut ChaCha8Rng, n: usize, dim: usize, durations: DurationConfig) -> ModelParams {
    let mut init: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
    log_normalize(&mut init);
    let mut trans = Array2::zeros((n, n));
    for i in 0..n {
        let mut row: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        log_normalize(&mut row);
        for j in 0..n {
            trans[[i, j]] = row[j];
        }
    }
    let lambdas = (0..n).map(|_| r.random_range(0.3..4.0)).collect();
    let means = Array2::from_shape_fn((n, dim), |_| r.random_range(-1.5..1.5));
    let variances = (0..dim).map(|_| r.random_range(0.5..2.0)).collect();
    ModelParams::new(labels(n), init, trans, lambdas, means, variances)
        .unwrap()
        .with_durations(durations)
}

pub fn random_features(r: &mut ChaCha8Rng, t: usize, dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((t, dim), |_| r.random_range(-2.0..2.0))
}

pub fn fixed(d: usize, final_region: FinalRegion) -> DurationConfig {
    DurationConfig {
        limit: DurationLimit::Fixed(d),
        final_region,
        ..DurationConfig::default()
    }
}

fn ln_factorial(d: usize) -> f64 {
    (1..=d).map(|k| (k as f64).ln()).sum()
}

/// Zero-truncated Poisson log pmf over `1..=d_max`, renormalized.
pub fn ztp(lambda: f64, d_max: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=d_max)
        .map(|d| d as f64 * lambda.ln() - lambda - ln_factorial(d))
        .collect();
    let z = raw.iter().map(|x| x.exp()).sum::<f64>().ln();
    raw.iter().map(|x| x - z).collect()
}

pub fn gaussian(p: &ModelParams, k: usize, x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(f, &xf)| {
            let v = p.variances[f];
            -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (xf - p.means[[k, f]]).powi(2) / v)
        })
        .sum()
}

/// Joint log probability of one segmentation under an unconstrained model.
pub fn joint(p: &ModelParams, seg: &[(usize, usize)], x: ArrayView2<f64>, d_max: usize) -> f64 {
    let t_len = x.nrows();
    let d_max = d_max.min(t_len);
    let mut lp = 0.0;
    let mut t = 0;
    for (i, &(k, d)) in seg.iter().enumerate() {
        lp += if i == 0 { p.init_log[k] } else { p.trans_log[[seg[i - 1].0, k]] };
        let table = ztp(p.lambdas[k], d_max);
        let last = i + 1 == seg.len();
        lp += if last && p.durations.final_region == FinalRegion::Survival {
            let tail: f64 = table[d - 1..].iter().map(|v| v.exp()).sum();
            tail.ln()
        } else {
            table[d - 1]
        };
        for s in t..t + d {
            lp += gaussian(p, k, x.row(s).as_slice().unwrap());
        }
        t += d;
    }
    lp
}

/// Every segmentation of `t_len` timesteps into regions of length at most
/// `d_max` with labels `0..n`.
pub fn all_segmentations(t_len: usize, n: usize, d_max: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(left: usize, n: usize, d_max: usize, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for d in 1..=d_max.min(left) {
            for k in 0..n {
                cur.push((k, d));
                rec(left - d, n, d_max, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(t_len, n, d_max.min(t_len), &mut Vec::new(), &mut out);
    out
}

pub fn log_sum(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `(log marginal, best segmentation, best score)` by enumeration.
pub fn brute_force(p: &ModelParams, x: ArrayView2<f64>, d_max: usize) -> (f64, Vec<(usize, usize)>, f64) {
    let segs = all_segmentations(x.nrows(), p.n_slots(), d_max);
    let scores: Vec<f64> = segs.iter().map(|s| joint(p, s, x, d_max)).collect();
    let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Among tied optima, prefer the shorter last region, then the lower
    // label, working backwards.
    let key = |s: &Vec<(usize, usize)>| s.iter().rev().map(|&(k, d)| (d, k)).collect::<Vec<_>>();
    let best = (0..segs.len())
        .filter(|&i| top - scores[i] < 1e-9)
        .min_by_key(|&i| key(&segs[i]))
        .unwrap();
    (log_sum(&scores), segs[best].clone(), scores[best])
}

pub fn pairs(seg: &Segmentation<usize>) -> Vec<(usize, usize)> {
    seg.regions.iter().map(|r| (r.label, r.duration)).collect()
}

/// Classic HMM forward algorithm.
pub fn hmm_forward(p: &ModelParams, x: ArrayView2<f64>) -> f64 {
    let n = p.n_slots();
    let mut alpha: Vec<f64> = (0..n)
        .map(|k| p.init_log[k] + gaussian(p, k, x.row(0).as_slice().unwrap()))
        .collect();
    for t in 1..x.nrows() {
        alpha = (0..n)
            .map(|k| {
                let terms: Vec<f64> = (0..n).map(|j| alpha[j] + p.trans_log[[j, k]]).collect();
                log_sum(&terms) + gaussian(p, k, x.row(t).as_slice().unwrap())
            })
            .collect();
    }
    log_sum(&alpha)
}

/// Classic HMM Viterbi: `(state per timestep, score)`.
pub fn hmm_viterbi(p: &ModelParams, x: ArrayView2<f64>) -> (Vec<usize>, f64) {
    let n = p.n_slots();
    let t_len = x.nrows();
    let mut delta: Vec<f64> = (0..n)
        .map(|k| p.init_log[k] + gaussian(p, k, x.row(0).as_slice().unwrap()))
        .collect();
    let mut back = vec![vec![0usize; n]; t_len];
    for t in 1..t_len {
        let mut next = vec![0.0; n];
        for k in 0..n {
            let (j, v) = (0..n)
                .map(|j| (j, delta[j] + p.trans_log[[j, k]]))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            back[t][k] = j;
            next[k] = v + gaussian(p, k, x.row(t).as_slice().unwrap());
        }
        delta = next;
    }
    let (mut k, score) = delta
        .iter()
        .cloned()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let mut path = vec![k; t_len];
    for t in (1..t_len).rev() {
        k = back[t][k];
        path[t - 1] = k;
    }
    (path, score)
}

/// Edit distance by memoized recursion over suffixes.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], i: usize, j: usize, memo: &mut Vec<Vec<Option<usize>>>) -> usize {
        if let Some(v) = memo[i][j] {
            return v;
        }
        let v = if i == a.len() {
            b.len() - j
        } else if j == b.len() {
            a.len() - i
        } else if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo[i][j] = Some(v);
        v
    }
    let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
    go(a, b, 0, 0, &mut memo)
}

/// Best total over all permutations (Heap's algorithm).
pub fn best_permutation_total(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let total = |p: &[usize]| (0..n).map(|i| m[[i, p[i]]]).sum::<f64>();
    let mut best = total(&perm);
    let mut c = vec![0; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.max(total(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}
