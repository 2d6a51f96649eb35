//! Segmental dynamic programs over one video.
//!
//! A [`Lattice`] holds every log-potential needed to score segmentations of
//! one video: structural log-probabilities over states, duration tables, and
//! per-timestep emission log-densities. Indices: `t` is a timestep boundary
//! in `0..=T`, a region `(r, s, d)` covers timesteps `s..s + d` with state
//! `r`.

use ndarray::{Array2, ArrayView2};

use crate::data::{Region, Segmentation};
use crate::error::{Error, Result};
use crate::logspace::log_sum_exp;
use crate::model::params::{
    gaussian_log_density, poisson_lambda_gradients, survival_log_table, DurationMode, FinalRegion,
    ModelParams,
};

const NEG_INF: f64 = f64::NEG_INFINITY;

/// Per-timestep restriction on states.
///
/// Disallowed `(t, state)` pairs get `penalty` added to their emission
/// log-density. The default penalty is large but finite so that every video
/// keeps at least one path.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMask {
    /// `T x n_states`.
    pub allowed: Array2<bool>,
    pub penalty: f64,
}

impl EmissionMask {
    pub const DEFAULT_PENALTY: f64 = -1e4;

    pub fn allow_all(t_len: usize, n_states: usize) -> Self {
        EmissionMask {
            allowed: Array2::from_elem((t_len, n_states), true),
            penalty: Self::DEFAULT_PENALTY,
        }
    }

    pub fn is_allowed(&self, t: usize, state: usize) -> bool {
        self.allowed[[t, state]]
    }
}

#[derive(Debug, Clone)]
pub struct Lattice {
    n: usize,
    t_len: usize,
    d_max: usize,
    init: Vec<f64>,
    trans: Vec<f64>,
    fin: Vec<f64>,
    /// `n x d_max`, regions that end before the last timestep.
    dur: Vec<f64>,
    /// `n x d_max`, the region that ends at the last timestep.
    dur_last: Vec<f64>,
    /// `T x n`.
    emit: Vec<f64>,
}

/// Forward pass results.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `(T + 1) x n`: log mass of prefixes whose last region (state `r`)
    /// ends at boundary `t`.
    pub alpha: Vec<f64>,
    /// `T x n`: log mass of prefixes followed by a region of state `r`
    /// starting at `s` (initial or transition term included).
    pub start: Vec<f64>,
    pub log_z: f64,
}

/// Expected (or observed) sufficient statistics over states.
#[derive(Debug, Clone, PartialEq)]
pub struct Counts {
    pub n: usize,
    pub d_max: usize,
    pub init: Vec<f64>,
    /// `n x n`
    pub trans: Vec<f64>,
    /// `n x d_max`, regions ending before the last timestep.
    pub dur: Vec<f64>,
    /// `n x d_max`, the final region.
    pub dur_last: Vec<f64>,
    /// `T x n`, per-timestep state occupancy.
    pub occupancy: Vec<f64>,
    pub log_z: f64,
}

impl Lattice {
    /// Builds the lattice with the model's default maximum duration.
    pub fn new(params: &ModelParams, features: ArrayView2<f64>, mask: Option<&EmissionMask>) -> Result<Self> {
        let d_max = params.max_duration(features.nrows());
        Self::with_max_duration(params, features, mask, d_max)
    }

    pub fn with_max_duration(
        params: &ModelParams,
        features: ArrayView2<f64>,
        mask: Option<&EmissionMask>,
        d_max: usize,
    ) -> Result<Self> {
        let t_len = features.nrows();
        let n = params.n_states();
        if t_len == 0 {
            return Err(Error::Validation("video has no timesteps".into()));
        }
        if features.ncols() != params.dim() {
            return Err(Error::DimensionMismatch {
                expected: params.dim(),
                found: features.ncols(),
            });
        }
        if let Some(m) = mask {
            if m.allowed.dim() != (t_len, n) {
                return Err(Error::Validation(format!(
                    "emission mask is {:?}, expected ({t_len}, {n})",
                    m.allowed.dim()
                )));
            }
        }
        let d_max = d_max.clamp(1, t_len);
        let structure = params.state_structure();

        let mut dur = Vec::with_capacity(n * d_max);
        let mut dur_last = Vec::with_capacity(n * d_max);
        for &slot in &params.space.slots {
            let table = params.duration_table(slot, d_max);
            match (params.durations.final_region, params.durations.mode) {
                (FinalRegion::Survival, DurationMode::Poisson) => {
                    dur_last.extend(survival_log_table(&table))
                }
                _ => dur_last.extend_from_slice(&table),
            }
            dur.extend(table);
        }

        let constant = params.emission_constant();
        let n_slots = params.n_slots();
        let mut slot_emit = vec![0.0; n_slots];
        let mut emit = Vec::with_capacity(t_len * n);
        for (t, x) in features.rows().into_iter().enumerate() {
            for (k, e) in slot_emit.iter_mut().enumerate() {
                *e = gaussian_log_density(x, params.means.row(k), &params.variances, constant);
            }
            for (r, &slot) in params.space.slots.iter().enumerate() {
                let mut e = slot_emit[slot];
                if let Some(m) = mask {
                    if !m.allowed[[t, r]] {
                        e += m.penalty;
                    }
                }
                emit.push(e);
            }
        }

        Ok(Lattice {
            n,
            t_len,
            d_max,
            init: structure.init,
            trans: structure.trans,
            fin: structure.fin,
            dur,
            dur_last,
            emit,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.t_len
    }

    pub fn is_empty(&self) -> bool {
        self.t_len == 0
    }

    pub fn max_duration(&self) -> usize {
        self.d_max
    }

    pub fn emission(&self, t: usize, r: usize) -> f64 {
        self.emit[t * self.n + r]
    }

    #[inline]
    fn duration(&self, r: usize, d: usize, end: usize) -> f64 {
        if end == self.t_len {
            self.dur_last[r * self.d_max + d - 1]
        } else {
            self.dur[r * self.d_max + d - 1]
        }
    }

    pub fn forward(&self) -> Forward {
        let (n, t_len) = (self.n, self.t_len);
        let mut alpha = vec![NEG_INF; (t_len + 1) * n];
        let mut start = vec![NEG_INF; t_len * n];
        start[..n].copy_from_slice(&self.init);
        let mut buf = Vec::with_capacity(n.max(self.d_max));
        for t in 1..=t_len {
            for r in 0..n {
                buf.clear();
                let mut acc = 0.0;
                for d in 1..=self.d_max.min(t) {
                    let s = t - d;
                    acc += self.emit[s * n + r];
                    buf.push(start[s * n + r] + self.duration(r, d, t) + acc);
                }
                alpha[t * n + r] = log_sum_exp(&buf);
            }
            if t < t_len {
                for r in 0..n {
                    buf.clear();
                    buf.extend((0..n).map(|q| alpha[t * n + q] + self.trans[q * n + r]));
                    start[t * n + r] = log_sum_exp(&buf);
                }
            }
        }
        buf.clear();
        buf.extend((0..n).map(|r| alpha[t_len * n + r] + self.fin[r]));
        let log_z = log_sum_exp(&buf);
        Forward { alpha, start, log_z }
    }

    pub fn log_marginal(&self) -> f64 {
        self.forward().log_z
    }

    /// `beta[t][r]`: log mass of everything after a region of state `r`
    /// that ends at boundary `t`; and `out[s][r]`: log mass of a region of
    /// state `r` starting at `s` together with everything after it.
    fn backward(&self) -> (Vec<f64>, Vec<f64>) {
        let (n, t_len) = (self.n, self.t_len);
        let mut beta = vec![NEG_INF; (t_len + 1) * n];
        let mut out = vec![NEG_INF; t_len * n];
        beta[t_len * n..].copy_from_slice(&self.fin);
        let mut buf = Vec::with_capacity(n.max(self.d_max));
        for s in (0..t_len).rev() {
            for r in 0..n {
                buf.clear();
                let mut acc = 0.0;
                for d in 1..=self.d_max.min(t_len - s) {
                    acc += self.emit[(s + d - 1) * n + r];
                    buf.push(self.duration(r, d, s + d) + acc + beta[(s + d) * n + r]);
                }
                out[s * n + r] = log_sum_exp(&buf);
            }
            if s > 0 {
                for q in 0..n {
                    buf.clear();
                    buf.extend((0..n).map(|r| self.trans[q * n + r] + out[s * n + r]));
                    beta[s * n + q] = log_sum_exp(&buf);
                }
            }
        }
        (beta, out)
    }

    /// Posterior expected counts of every structural, duration and
    /// occupancy event. All counts are zero when no path is feasible.
    pub fn expected_counts(&self) -> Counts {
        let (n, t_len, d_max) = (self.n, self.t_len, self.d_max);
        let fwd = self.forward();
        let log_z = fwd.log_z;
        let mut counts = Counts::zeros(n, t_len, d_max);
        counts.log_z = log_z;
        if !log_z.is_finite() {
            return counts;
        }
        let (beta, out) = self.backward();

        for r in 0..n {
            counts.init[r] = (self.init[r] + out[r] - log_z).exp();
        }
        for s in 1..t_len {
            for q in 0..n {
                let a = fwd.alpha[s * n + q];
                if a == NEG_INF {
                    continue;
                }
                for r in 0..n {
                    counts.trans[q * n + r] += (a + self.trans[q * n + r] + out[s * n + r] - log_z).exp();
                }
            }
        }
        // Occupancy via a difference array over region posteriors.
        let mut diff = vec![0.0; (t_len + 1) * n];
        for s in 0..t_len {
            for r in 0..n {
                let st = fwd.start[s * n + r];
                if st == NEG_INF {
                    continue;
                }
                let mut acc = 0.0;
                for d in 1..=d_max.min(t_len - s) {
                    let end = s + d;
                    acc += self.emit[(end - 1) * n + r];
                    let lp = st + self.duration(r, d, end) + acc + beta[end * n + r] - log_z;
                    if lp == NEG_INF {
                        continue;
                    }
                    let p = lp.exp();
                    if end == t_len {
                        counts.dur_last[r * d_max + d - 1] += p;
                    } else {
                        counts.dur[r * d_max + d - 1] += p;
                    }
                    diff[s * n + r] += p;
                    diff[end * n + r] -= p;
                }
            }
        }
        let mut running = vec![0.0; n];
        for t in 0..t_len {
            for r in 0..n {
                running[r] += diff[t * n + r];
                counts.occupancy[t * n + r] = running[r];
            }
        }
        counts
    }

    /// Log-probability of one state segmentation (`-inf` when it uses a
    /// disallowed transition or a region longer than the maximum duration).
    pub fn score(&self, seg: &Segmentation<usize>) -> Result<f64> {
        if seg.len() != self.t_len {
            return Err(Error::Validation(format!(
                "segmentation covers {} timesteps, video has {}",
                seg.len(),
                self.t_len
            )));
        }
        if let Some(r) = seg.regions.iter().find(|r| r.label >= self.n || r.duration == 0) {
            return Err(Error::Validation(format!("invalid region {r:?}")));
        }
        let n = self.n;
        let mut total = 0.0;
        let mut s = 0;
        for (k, region) in seg.regions.iter().enumerate() {
            let r = region.label;
            total += if k == 0 {
                self.init[r]
            } else {
                self.trans[seg.regions[k - 1].label * n + r]
            };
            if region.duration > self.d_max {
                return Ok(NEG_INF);
            }
            let end = s + region.duration;
            total += self.duration(r, region.duration, end);
            total += (s..end).map(|t| self.emit[t * n + r]).sum::<f64>();
            s = end;
        }
        total += self.fin[seg.regions.last().map(|r| r.label).unwrap_or(0)];
        Ok(total)
    }

    /// Observed counts of a single segmentation, in the same layout as
    /// [`Lattice::expected_counts`].
    pub fn path_counts(&self, seg: &Segmentation<usize>) -> Result<Counts> {
        let log_z = self.score(seg)?;
        let (n, d_max) = (self.n, self.d_max);
        let mut counts = Counts::zeros(n, self.t_len, d_max);
        counts.log_z = log_z;
        let mut s = 0;
        for (k, region) in seg.regions.iter().enumerate() {
            let r = region.label;
            if k == 0 {
                counts.init[r] += 1.0;
            } else {
                counts.trans[seg.regions[k - 1].label * n + r] += 1.0;
            }
            let end = s + region.duration;
            if region.duration <= d_max {
                if end == self.t_len {
                    counts.dur_last[r * d_max + region.duration - 1] += 1.0;
                } else {
                    counts.dur[r * d_max + region.duration - 1] += 1.0;
                }
            }
            for t in s..end {
                counts.occupancy[t * n + r] += 1.0;
            }
            s = end;
        }
        Ok(counts)
    }

    /// Highest-scoring state segmentation and its score, or `None` when no
    /// path is feasible.
    ///
    /// Ties prefer the shorter region, then the lower state index. Scores
    /// within a relative `1e-12` count as tied, so rounding does not break
    /// ties between equal paths.
    pub fn viterbi(&self) -> Option<(Segmentation<usize>, f64)> {
        let (n, t_len) = (self.n, self.t_len);
        let mut best = vec![NEG_INF; (t_len + 1) * n];
        let mut best_d = vec![0usize; (t_len + 1) * n];
        let mut start = vec![NEG_INF; t_len * n];
        let mut start_from = vec![usize::MAX; t_len * n];
        start[..n].copy_from_slice(&self.init);
        for t in 1..=t_len {
            for r in 0..n {
                let mut acc = 0.0;
                let (mut top, mut top_d) = (NEG_INF, 0);
                for d in 1..=self.d_max.min(t) {
                    let s = t - d;
                    acc += self.emit[s * n + r];
                    let v = start[s * n + r] + self.duration(r, d, t) + acc;
                    if beats(v, top) {
                        top = v;
                        top_d = d;
                    }
                }
                best[t * n + r] = top;
                best_d[t * n + r] = top_d;
            }
            if t < t_len {
                for r in 0..n {
                    let (mut top, mut arg) = (NEG_INF, usize::MAX);
                    for q in 0..n {
                        let v = best[t * n + q] + self.trans[q * n + r];
                        if beats(v, top) {
                            top = v;
                            arg = q;
                        }
                    }
                    start[t * n + r] = top;
                    start_from[t * n + r] = arg;
                }
            }
        }
        let (mut top, mut last) = (NEG_INF, usize::MAX);
        for r in 0..n {
            let v = best[t_len * n + r] + self.fin[r];
            let better = beats(v, top)
                || (v > NEG_INF && !beats(top, v) && best_d[t_len * n + r] < best_d[t_len * n + last]);
            if better {
                top = v;
                last = r;
            }
        }
        if top == NEG_INF {
            return None;
        }
        let mut regions = Vec::new();
        let (mut t, mut r) = (t_len, last);
        loop {
            let d = best_d[t * n + r];
            regions.push(Region::new(r, d));
            let s = t - d;
            if s == 0 {
                break;
            }
            r = start_from[s * n + r];
            t = s;
        }
        regions.reverse();
        Some((Segmentation { regions }, top))
    }
}

impl Counts {
    pub fn zeros(n: usize, t_len: usize, d_max: usize) -> Self {
        Counts {
            n,
            d_max,
            init: vec![0.0; n],
            trans: vec![0.0; n * n],
            dur: vec![0.0; n * d_max],
            dur_last: vec![0.0; n * d_max],
            occupancy: vec![0.0; t_len * n],
            log_z: NEG_INF,
        }
    }
}

/// `d log p / d λ` tables for one slot under the lattice's duration model:
/// `(regular, final)`.
pub(crate) fn lambda_gradient_tables(params: &ModelParams, slot: usize, d_max: usize) -> (Vec<f64>, Vec<f64>) {
    if params.durations.mode == DurationMode::Unit {
        return (vec![0.0; d_max], vec![0.0; d_max]);
    }
    let lambda = params.lambdas[slot];
    let table = params.duration_table(slot, d_max);
    let (pmf, surv) = poisson_lambda_gradients(lambda, &table);
    match params.durations.final_region {
        FinalRegion::Pmf => (pmf.clone(), pmf),
        FinalRegion::Survival => (pmf, surv),
    }
}

/// `log P(x)` summed over all segmentations.
pub fn forward_log_marginal(
    params: &ModelParams,
    features: ArrayView2<f64>,
    mask: Option<&EmissionMask>,
) -> Result<f64> {
    Ok(Lattice::new(params, features, mask)?.log_marginal())
}

/// Most probable state segmentation and its log joint probability.
pub fn viterbi_decode(
    params: &ModelParams,
    features: ArrayView2<f64>,
    mask: Option<&EmissionMask>,
) -> Result<(Segmentation<usize>, f64)> {
    let lattice = Lattice::new(params, features, mask)?;
    lattice.viterbi().ok_or_else(|| Error::NoValidPath {
        timesteps: features.nrows(),
        reason: format!(
            "{} states, maximum duration {}; the allowed transitions cannot cover the video",
            lattice.n_states(),
            lattice.max_duration()
        ),
    })
}

/// `log P(segmentation, x)` for a segmentation over states.
pub fn log_joint(params: &ModelParams, seg: &Segmentation<usize>, features: ArrayView2<f64>) -> Result<f64> {
    Lattice::new(params, features, None)?.score(seg)
}

const TIE_TOLERANCE: f64 = 1e-12;

/// `v` exceeds `top` by more than the tie tolerance.
fn beats(v: f64, top: f64) -> bool {
    if top == NEG_INF {
        return v > NEG_INF;
    }
    v > top + TIE_TOLERANCE * top.abs().max(1.0)
}
