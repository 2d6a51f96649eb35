use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Region, Segmentation};
use crate::model::params::ModelParams;

/// Index drawn from log-weights (need not be normalized). `None` if every
/// weight is zero.
pub(crate) fn draw_log_categorical<R: Rng + ?Sized>(rng: &mut R, log_weights: &[f64]) -> Option<usize> {
    let m = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return None;
    }
    let w: Vec<f64> = log_weights.iter().map(|&x| (x - m).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (i, wi) in w.iter().enumerate() {
        if *wi > 0.0 {
            last = Some(i);
            if u < *wi {
                return Some(i);
            }
            u -= wi;
        }
    }
    last
}

/// Ancestral sample of a state segmentation and its features.
///
/// Regions are drawn until they cover `t_len`; the final region is cut to
/// end exactly at `t_len`. A state with no allowed successor extends to the
/// end of the video.
pub fn sample(params: &ModelParams, t_len: usize, seed: u64) -> (Segmentation<usize>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(params, t_len, &mut rng)
}

pub fn sample_with<R: Rng + ?Sized>(
    params: &ModelParams,
    t_len: usize,
    rng: &mut R,
) -> (Segmentation<usize>, Array2<f64>) {
    let segmentation = sample_segmentation(params, t_len, rng);
    let features = sample_features(params, &segmentation, rng);
    (segmentation, features)
}

pub fn sample_segmentation<R: Rng + ?Sized>(params: &ModelParams, t_len: usize, rng: &mut R) -> Segmentation<usize> {
    let t_len = t_len.max(1);
    let n = params.n_states();
    let structure = params.state_structure();
    let d_max = params.max_duration(t_len);
    let tables: Vec<Vec<f64>> = params
        .space
        .slots
        .iter()
        .map(|&slot| params.duration_table(slot, d_max))
        .collect();

    let mut regions: Vec<Region<usize>> = Vec::new();
    let mut covered = 0;
    let mut state = draw_log_categorical(rng, &structure.init).unwrap_or(0);
    loop {
        let d = draw_log_categorical(rng, &tables[state]).map_or(1, |i| i + 1);
        if covered + d >= t_len {
            regions.push(Region::new(state, t_len - covered));
            break;
        }
        covered += d;
        regions.push(Region::new(state, d));
        match draw_log_categorical(rng, &structure.trans[state * n..(state + 1) * n]) {
            Some(next) => state = next,
            None => {
                regions.last_mut().expect("just pushed").duration += t_len - covered;
                break;
            }
        }
    }
    Segmentation { regions }
}

pub fn sample_features<R: Rng + ?Sized>(
    params: &ModelParams,
    segmentation: &Segmentation<usize>,
    rng: &mut R,
) -> Array2<f64> {
    let dim = params.dim();
    let sd: Vec<f64> = params.variances.iter().map(|v| v.sqrt()).collect();
    let mut x = Array2::zeros((segmentation.len(), dim));
    let mut t = 0;
    for region in &segmentation.regions {
        let slot = params.space.slots[region.label];
        for _ in 0..region.duration {
            for f in 0..dim {
                let z: f64 = rng.sample(StandardNormal);
                x[[t, f]] = params.means[[slot, f]] + sd[f] * z;
            }
            t += 1;
        }
    }
    x
}

/// Probability that timestep `t` is in state `r` under [`sample`]'s
/// generative process, as a `T x n` matrix.
pub fn expected_occupancy(params: &ModelParams, t_len: usize) -> Array2<f64> {
    let n = params.n_states();
    let structure = params.state_structure();
    let d_max = params.max_duration(t_len);
    let pmf: Vec<Vec<f64>> = params
        .space
        .slots
        .iter()
        .map(|&slot| params.duration_table(slot, d_max).iter().map(|x| x.exp()).collect())
        .collect();
    let trans: Vec<f64> = structure.trans.iter().map(|x| x.exp()).collect();
    let absorbing: Vec<bool> = (0..n).map(|r| trans[r * n..(r + 1) * n].iter().all(|&p| p == 0.0)).collect();

    // starts[s][r] = P(a region of state r starts at s)
    let mut starts = Array2::<f64>::zeros((t_len, n));
    for r in 0..n {
        starts[[0, r]] = structure.init[r].exp();
    }
    for s in 0..t_len {
        for r in 0..n {
            let p = starts[[s, r]];
            if p == 0.0 || absorbing[r] {
                continue;
            }
            for (d, pd) in pmf[r].iter().enumerate() {
                let next = s + d + 1;
                if next >= t_len {
                    break;
                }
                for q in 0..n {
                    starts[[next, q]] += p * pd * trans[r * n + q];
                }
            }
        }
    }
    let mut occ = Array2::<f64>::zeros((t_len, n));
    for r in 0..n {
        // survival[k] = P(D > k)
        let mut survival = vec![1.0; d_max + 1];
        for k in 1..=d_max {
            survival[k] = (survival[k - 1] - pmf[r][k - 1]).max(0.0);
        }
        for s in 0..t_len {
            let p = starts[[s, r]];
            if p == 0.0 {
                continue;
            }
            for t in s..t_len {
                let k = t - s;
                let stay = if absorbing[r] {
                    1.0
                } else if k >= d_max {
                    break;
                } else {
                    survival[k]
                };
                occ[[t, r]] += p * stay;
            }
        }
    }
    occ
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Label;
    use crate::model::params::{DurationConfig, DurationLimit};
    use ndarray::arr2;

    fn params(n: usize) -> ModelParams {
        let labels: Vec<Label> = (0..n - 1).map(Label::Step).chain([Label::Background]).collect();
        let mut p = ModelParams::uniform(labels, 2, 3.0);
        for k in 0..n {
            p.means[[k, 0]] = 10.0 * k as f64;
        }
        p
    }

    #[test]
    fn single_label_covers_video() {
        let mut p = params(1);
        p.lambdas = vec![500.0];
        let (seg, x) = sample(&p, 40, 7);
        assert_eq!(seg.regions, vec![Region::new(0, 40)]);
        assert_eq!(x.dim(), (40, 2));
    }

    #[test]
    fn samples_are_reproducible_and_cover_t() {
        let p = params(3);
        for seed in 0..20 {
            let (a, xa) = sample(&p, 33, seed);
            let (b, xb) = sample(&p, 33, seed);
            assert_eq!(a, b);
            assert_eq!(xa, xb);
            assert_eq!(a.len(), 33);
            assert!(a.regions.iter().all(|r| r.duration >= 1));
        }
    }

    #[test]
    fn first_region_frequencies_match_initial() {
        let mut p = params(3);
        p.init_log = vec![0.2f64.ln(), 0.5f64.ln(), 0.3f64.ln()];
        let probs = [0.2, 0.5, 0.3];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..trials {
            let seg = sample_segmentation(&p, 4, &mut rng);
            counts[seg.regions[0].label] += 1;
        }
        for k in 0..3 {
            let freq = counts[k] as f64 / trials as f64;
            let se = (probs[k] * (1.0 - probs[k]) / trials as f64).sqrt();
            assert!((freq - probs[k]).abs() < 3.0 * se, "state {k}: {freq}");
        }
    }

    #[test]
    fn feature_means_match_label_means() {
        let p = params(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sums = [[0.0; 2]; 2];
        let mut n = [0usize; 2];
        for _ in 0..300 {
            let (seg, x) = sample_with(&p, 50, &mut rng);
            for (t, l) in seg.to_frames().labels.iter().enumerate() {
                n[*l] += 1;
                for f in 0..2 {
                    sums[*l][f] += x[[t, f]];
                }
            }
        }
        for k in 0..2 {
            let se = (1.0 / n[k] as f64).sqrt();
            for f in 0..2 {
                let mean = sums[k][f] / n[k] as f64;
                assert!((mean - p.means[[k, f]]).abs() < 3.0 * se, "label {k} dim {f}: {mean}");
            }
        }
    }

    #[test]
    fn hmm_run_lengths_are_geometric() {
        let stay: f64 = 0.8;
        let mut p = params(2).hmm();
        p.trans_log = arr2(&[[stay.ln(), (1.0 - stay).ln()], [(1.0 - stay).ln(), stay.ln()]]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut runs = Vec::new();
        for _ in 0..20_000 {
            let seg = sample_segmentation(&p, 100, &mut rng);
            assert!(seg.regions.iter().all(|r| r.duration == 1));
            // First run; censoring at 100 frames has negligible probability.
            runs.push(seg.to_frames().to_segmentation().regions[0].duration as f64);
        }
        let mean = runs.iter().sum::<f64>() / runs.len() as f64;
        let expected = 1.0 / (1.0 - stay);
        let var = stay / (1.0 - stay).powi(2);
        let se = (var / runs.len() as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * se, "mean run {mean}, expected {expected}");
    }

    #[test]
    fn occupancy_matches_monte_carlo() {
        let mut p = params(3).with_durations(DurationConfig {
            limit: DurationLimit::Fixed(12),
            ..DurationConfig::default()
        });
        p.lambdas = vec![2.0, 5.0, 3.5];
        p.init_log = vec![0.6f64.ln(), 0.1f64.ln(), 0.3f64.ln()];
        let t_len = 15;
        let occ = expected_occupancy(&p, t_len);
        for t in 0..t_len {
            let row: f64 = occ.row(t).sum();
            assert!((row - 1.0).abs() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let trials = 40_000;
        let mut hits = Array2::<f64>::zeros((t_len, 3));
        for _ in 0..trials {
            let seg = sample_segmentation(&p, t_len, &mut rng);
            for (t, &l) in seg.to_frames().labels.iter().enumerate() {
                hits[[t, l]] += 1.0;
            }
        }
        for t in 0..t_len {
            for r in 0..3 {
                let q = occ[[t, r]];
                let freq = hits[[t, r]] / trials as f64;
                let se = (q * (1.0 - q) / trials as f64).sqrt().max(1e-9);
                assert!((freq - q).abs() < 4.0 * se, "t={t} r={r}: {freq} vs {q}");
            }
        }
    }
}
