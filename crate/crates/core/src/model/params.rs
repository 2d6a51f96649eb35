use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::logspace::{log_sum_exp, masked_log_softmax};

/// How region durations are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationMode {
    /// Zero-truncated Poisson renormalized over `1..=D_max`.
    Poisson,
    /// Every region lasts one timestep; longer runs come from
    /// self-transitions (plain HMM).
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationLimit {
    /// `min(T, ceil(max_r λ_r + 6 sqrt(λ_r)))`, raised when the state space
    /// needs longer regions to cover `T`.
    Auto,
    Fixed(usize),
}

/// Duration term used for the region that ends at the last timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalRegion {
    Pmf,
    /// `P(d >= observed)`: the last region may be cut off by the video end.
    Survival,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DurationConfig {
    pub mode: DurationMode,
    pub limit: DurationLimit,
    pub final_region: FinalRegion,
}

impl Default for DurationConfig {
    fn default() -> Self {
        DurationConfig {
            mode: DurationMode::Poisson,
            limit: DurationLimit::Auto,
            final_region: FinalRegion::Pmf,
        }
    }
}

impl DurationConfig {
    pub fn hmm() -> Self {
        DurationConfig {
            mode: DurationMode::Unit,
            limit: DurationLimit::Fixed(1),
            final_region: FinalRegion::Pmf,
        }
    }
}

/// Decoding states and the parameter slot each one reads from.
///
/// Several states may share a slot (tied parameters). The allowed sets
/// restrict which states can start, follow each other, or end a video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    pub slots: Vec<usize>,
    pub initial: Vec<bool>,
    pub transitions: Vec<Vec<bool>>,
    pub terminal: Vec<bool>,
    /// Longest possible region sequence, when the transition graph is acyclic.
    pub max_regions: Option<usize>,
}

impl StateSpace {
    /// One state per slot, everything allowed.
    pub fn unconstrained(n: usize) -> Self {
        StateSpace {
            slots: (0..n).collect(),
            initial: vec![true; n],
            transitions: vec![vec![true; n]; n],
            terminal: vec![true; n],
            max_regions: None,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_unconstrained(&self) -> bool {
        self.slots.iter().enumerate().all(|(i, &s)| i == s)
            && self.initial.iter().all(|&a| a)
            && self.terminal.iter().all(|&a| a)
            && self.transitions.iter().flatten().all(|&a| a)
    }
}

/// Structural log-probabilities over states, after masking and
/// renormalization of the slot-level values.
#[derive(Debug, Clone, PartialEq)]
pub struct StateStructure {
    pub init: Vec<f64>,
    /// Row-major `n x n`, `trans[i * n + j] = log P(j | i)`.
    pub trans: Vec<f64>,
    /// `0` for allowed terminal states, `-inf` otherwise.
    pub fin: Vec<f64>,
}

/// Parameters of the segmental model.
///
/// Slot `i` carries the parameters of `labels[i]`: initial and transition
/// log-probabilities, the Poisson duration mean, and the emission mean. The
/// diagonal covariance is shared by all slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub labels: Vec<Label>,
    pub init_log: Vec<f64>,
    pub trans_log: Array2<f64>,
    pub lambdas: Vec<f64>,
    pub means: Array2<f64>,
    pub variances: Vec<f64>,
    pub durations: DurationConfig,
    pub space: StateSpace,
}

const NORMALIZATION_TOL: f64 = 1e-9;

impl ModelParams {
    pub fn new(
        labels: Vec<Label>,
        init_log: Vec<f64>,
        trans_log: Array2<f64>,
        lambdas: Vec<f64>,
        means: Array2<f64>,
        variances: Vec<f64>,
    ) -> Result<Self> {
        let n = labels.len();
        let params = ModelParams {
            space: StateSpace::unconstrained(n),
            labels,
            init_log,
            trans_log,
            lambdas,
            means,
            variances,
            durations: DurationConfig::default(),
        };
        params.validate()?;
        Ok(params)
    }

    /// Uniform structure, unit durations, zero means, unit variances.
    pub fn uniform(labels: Vec<Label>, dim: usize, lambda: f64) -> Self {
        let n = labels.len();
        let u = -(n as f64).ln();
        ModelParams {
            space: StateSpace::unconstrained(n),
            labels,
            init_log: vec![u; n],
            trans_log: Array2::from_elem((n, n), u),
            lambdas: vec![lambda; n],
            means: Array2::zeros((n, dim)),
            variances: vec![1.0; dim],
            durations: DurationConfig::default(),
        }
    }

    pub fn with_durations(mut self, durations: DurationConfig) -> Self {
        self.durations = durations;
        self
    }

    /// Duration ablation: every region lasts one timestep.
    pub fn hmm(self) -> Self {
        self.with_durations(DurationConfig::hmm())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if n == 0 {
            return Err(Error::Validation("model has no labels".into()));
        }
        let dim = self.variances.len();
        if self.init_log.len() != n || self.lambdas.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.init_log.len().min(self.lambdas.len()),
            });
        }
        if self.trans_log.dim() != (n, n) {
            return Err(Error::Validation(format!(
                "transition matrix is {:?}, expected ({n}, {n})",
                self.trans_log.dim()
            )));
        }
        if self.means.dim() != (n, dim) {
            return Err(Error::Validation(format!(
                "means are {:?}, expected ({n}, {dim})",
                self.means.dim()
            )));
        }
        if let Some(v) = self.variances.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Validation(format!("non-positive variance {v}")));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(Error::Validation(format!("invalid duration mean {l}")));
        }
        check_normalized("initial distribution", &self.init_log)?;
        for (i, row) in self.trans_log.rows().into_iter().enumerate() {
            check_normalized(&format!("transition row {i}"), row.as_slice().unwrap_or(&row.to_vec()))?;
        }
        if let DurationLimit::Fixed(0) = self.durations.limit {
            return Err(Error::Validation("maximum duration must be at least 1".into()));
        }
        let s = &self.space;
        if s.initial.len() != s.len()
            || s.terminal.len() != s.len()
            || s.transitions.len() != s.len()
            || s.transitions.iter().any(|r| r.len() != s.len())
            || s.slots.iter().any(|&slot| slot >= n)
        {
            return Err(Error::Validation("state space inconsistent with model".into()));
        }
        Ok(())
    }

    pub fn n_slots(&self) -> usize {
        self.labels.len()
    }

    pub fn n_states(&self) -> usize {
        self.space.len()
    }

    pub fn dim(&self) -> usize {
        self.variances.len()
    }

    pub fn slot_of(&self, label: Label) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn state_label(&self, state: usize) -> Label {
        self.labels[self.space.slots[state]]
    }

    /// Maximum region duration for a video of `t_len` timesteps.
    pub fn max_duration(&self, t_len: usize) -> usize {
        let t_len = t_len.max(1);
        if self.durations.mode == DurationMode::Unit {
            return 1;
        }
        match self.durations.limit {
            DurationLimit::Fixed(d) => d.max(1),
            DurationLimit::Auto => {
                let tail = self
                    .lambdas
                    .iter()
                    .map(|&l| (l + 6.0 * l.sqrt()).ceil())
                    .fold(1.0, f64::max) as usize;
                let needed = self
                    .space
                    .max_regions
                    .map(|k| t_len.div_ceil(k.max(1)))
                    .unwrap_or(1);
                tail.max(needed).min(t_len)
            }
        }
    }

    /// `log p(d)` for `d` in `1..=max_duration` under the slot's duration model.
    pub fn duration_table(&self, slot: usize, max_duration: usize) -> Vec<f64> {
        match self.durations.mode {
            DurationMode::Unit => {
                let mut t = vec![f64::NEG_INFINITY; max_duration];
                t[0] = 0.0;
                t
            }
            DurationMode::Poisson => poisson_log_pmf_table(self.lambdas[slot], max_duration),
        }
    }

    pub fn duration_log_pmf(&self, slot: usize, d: usize, max_duration: usize) -> Result<f64> {
        if d == 0 || d > max_duration {
            return Err(Error::DurationOutOfSupport {
                duration: d,
                max_duration,
            });
        }
        Ok(self.duration_table(slot, max_duration)[d - 1])
    }

    /// Diagonal-Gaussian log density of `x` under the slot's mean.
    pub fn emission_log_prob(&self, x: ArrayView1<f64>, slot: usize) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(gaussian_log_density(
            x,
            self.means.row(slot),
            &self.variances,
            self.emission_constant(),
        ))
    }

    /// `-0.5 * sum_f log(2 pi var_f)`.
    pub fn emission_constant(&self) -> f64 {
        -0.5 * self
            .variances
            .iter()
            .map(|v| (2.0 * std::f64::consts::PI * v).ln())
            .sum::<f64>()
    }

    /// Structural log-probabilities over states: slot values restricted to
    /// the allowed sets and renormalized.
    pub fn state_structure(&self) -> StateStructure {
        let s = &self.space;
        let n = s.len();
        let init_scores: Vec<f64> = s.slots.iter().map(|&k| self.init_log[k]).collect();
        let init = masked_log_softmax(&init_scores, &s.initial);
        let mut trans = Vec::with_capacity(n * n);
        for (i, allowed) in s.transitions.iter().enumerate() {
            let from = s.slots[i];
            let scores: Vec<f64> = s.slots.iter().map(|&k| self.trans_log[[from, k]]).collect();
            trans.extend(masked_log_softmax(&scores, allowed));
        }
        let fin = s
            .terminal
            .iter()
            .map(|&a| if a { 0.0 } else { f64::NEG_INFINITY })
            .collect();
        StateStructure { init, trans, fin }
    }
}

fn check_normalized(what: &str, logp: &[f64]) -> Result<()> {
    if logp.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(Error::Validation(format!("{what} contains NaN or +inf")));
    }
    let total = log_sum_exp(logp).exp();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Validation(format!("{what} sums to {total}, expected 1")));
    }
    Ok(())
}

pub(crate) fn gaussian_log_density(
    x: ArrayView1<f64>,
    mean: ArrayView1<f64>,
    variances: &[f64],
    constant: f64,
) -> f64 {
    let mut quad = 0.0;
    for ((&xi, &mi), &v) in x.iter().zip(mean.iter()).zip(variances) {
        let d = xi - mi;
        quad += d * d / v;
    }
    constant - 0.5 * quad
}

/// Zero-truncated Poisson log-pmf renormalized over `1..=max_duration`.
pub fn poisson_log_pmf_table(lambda: f64, max_duration: usize) -> Vec<f64> {
    let ln_lambda = lambda.ln();
    let mut ln_fact = 0.0;
    let raw: Vec<f64> = (1..=max_duration)
        .map(|d| {
            ln_fact += (d as f64).ln();
            d as f64 * ln_lambda - lambda - ln_fact
        })
        .collect();
    let z = log_sum_exp(&raw);
    raw.into_iter().map(|x| x - z).collect()
}

/// `log P(D >= d)` for `d` in `1..=D_max`, from a log-pmf table.
pub fn survival_log_table(log_pmf: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; log_pmf.len()];
    let mut acc = f64::NEG_INFINITY;
    for d in (0..log_pmf.len()).rev() {
        acc = crate::logspace::log_add(acc, log_pmf[d]);
        out[d] = acc;
    }
    // P(D >= 1) is exactly one.
    if !out.is_empty() {
        out[0] = 0.0;
    }
    out
}

/// Derivatives with respect to λ of the truncated log-pmf and log-survival
/// tables: `(d - m) / λ` and `(E[D | D >= d] - m) / λ`, where `m` is the
/// truncated mean.
pub fn poisson_lambda_gradients(lambda: f64, log_pmf: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let probs: Vec<f64> = log_pmf.iter().map(|x| x.exp()).collect();
    let mean: f64 = probs.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum();
    let pmf_grad = (1..=probs.len()).map(|d| (d as f64 - mean) / lambda).collect();
    let mut surv_grad = vec![0.0; probs.len()];
    let (mut mass, mut first_moment) = (0.0, 0.0);
    for d in (1..=probs.len()).rev() {
        mass += probs[d - 1];
        first_moment += d as f64 * probs[d - 1];
        surv_grad[d - 1] = if mass > 0.0 {
            (first_moment / mass - mean) / lambda
        } else {
            (d as f64 - mean) / lambda
        };
    }
    (pmf_grad, surv_grad)
}
