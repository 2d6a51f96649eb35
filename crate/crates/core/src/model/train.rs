//! Gradient training of the segmental model.
//!
//! Structural parameters are optimized as unconstrained scores passed
//! through a (masked) softmax, duration means through a softplus. Gradients
//! come from posterior expected counts of the lattice; the conditional
//! objective subtracts them from the counts of the reference path.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Label, Segmentation};
use crate::error::{Error, Result};
use crate::logspace::{masked_log_softmax, sigmoid, softplus, softplus_inverse};
use crate::model::lattice::{lambda_gradient_tables, Counts, EmissionMask, Lattice};
use crate::model::params::{DurationConfig, ModelParams, StateSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Videos per mini-batch.
    pub batch_size: usize,
    /// Multiplier applied to the learning rate on a plateau.
    pub decay: f64,
    /// Epochs without improvement tolerated before decaying.
    pub patience: usize,
    pub max_epochs: usize,
    /// Training stops once the learning rate falls below this.
    pub min_learning_rate: f64,
    pub seed: u64,
    /// Standard deviation of the initial structural scores.
    pub init_noise: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-3,
            batch_size: 5,
            decay: 0.5,
            patience: 1,
            max_epochs: 200,
            min_learning_rate: 1e-5,
            seed: 0,
            init_noise: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be > 0", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Config(format!("decay {} must be in (0, 1]", self.decay)));
        }
        Ok(())
    }
}

/// One training video.
#[derive(Debug, Clone)]
pub struct TrainItem<'a> {
    pub id: &'a str,
    pub features: ArrayView2<'a, f64>,
    pub mask: Option<&'a EmissionMask>,
    /// Reference state segmentation, needed by the conditional objective.
    pub reference: Option<Segmentation<usize>>,
}

impl<'a> TrainItem<'a> {
    pub fn new(id: &'a str, features: ArrayView2<'a, f64>) -> Self {
        TrainItem {
            id,
            features,
            mask: None,
            reference: None,
        }
    }

    pub fn with_mask(mut self, mask: &'a EmissionMask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn with_reference(mut self, reference: Segmentation<usize>) -> Self {
        self.reference = Some(reference);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// `sum_i log P(x_i)`
    Marginal,
    /// `sum_i log P(l_i | x_i)`
    Conditional,
}

/// Unconstrained parameters, one entry per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct RawParams {
    pub init: Vec<f64>,
    pub trans: Array2<f64>,
    /// Softplus pre-images of the duration means.
    pub lambda: Vec<f64>,
    pub means: Array2<f64>,
}

impl RawParams {
    pub fn from_params(params: &ModelParams) -> Self {
        RawParams {
            init: params.init_log.clone(),
            trans: params.trans_log.clone(),
            lambda: params.lambdas.iter().map(|&l| softplus_inverse(l)).collect(),
            means: params.means.clone(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        RawParams {
            init: vec![0.0; self.init.len()],
            trans: Array2::zeros(self.trans.dim()),
            lambda: vec![0.0; self.lambda.len()],
            means: Array2::zeros(self.means.dim()),
        }
    }

    /// Model parameters with the template's labels, covariance, duration
    /// settings and state space.
    pub fn to_params(&self, template: &ModelParams) -> ModelParams {
        let n = self.init.len();
        let all = vec![true; n];
        let init_log = masked_log_softmax(&self.init, &all);
        let mut trans_log = Array2::zeros((n, n));
        for i in 0..n {
            let row: Vec<f64> = self.trans.row(i).to_vec();
            for (j, v) in masked_log_softmax(&row, &all).into_iter().enumerate() {
                trans_log[[i, j]] = v;
            }
        }
        ModelParams {
            labels: template.labels.clone(),
            init_log,
            trans_log,
            lambdas: self.lambda.iter().map(|&r| softplus(r).max(1e-8)).collect(),
            means: self.means.clone(),
            variances: template.variances.clone(),
            durations: template.durations,
            space: template.space.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.init.len() + self.trans.len() + self.lambda.len() + self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flattened view in the order init, trans, lambda, means.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.init);
        v.extend(self.trans.iter());
        v.extend_from_slice(&self.lambda);
        v.extend(self.means.iter());
        v
    }

    pub fn set_from_slice(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.len());
        let mut it = v.iter().copied();
        for x in self.init.iter_mut() {
            *x = it.next().unwrap();
        }
        for x in self.trans.iter_mut() {
            *x = it.next().unwrap();
        }
        for x in self.lambda.iter_mut() {
            *x = it.next().unwrap();
        }
        for x in self.means.iter_mut() {
            *x = it.next().unwrap();
        }
    }

    fn add_assign(&mut self, other: &RawParams) {
        self.init.iter_mut().zip(&other.init).for_each(|(a, b)| *a += b);
        self.trans += &other.trans;
        self.lambda.iter_mut().zip(&other.lambda).for_each(|(a, b)| *a += b);
        self.means += &other.means;
    }
}

/// Maximum duration used for a training video: the model default, raised
/// to cover the reference's longest region.
fn item_max_duration(params: &ModelParams, item: &TrainItem) -> usize {
    let base = params.max_duration(item.features.nrows());
    match &item.reference {
        Some(seg) if params.durations.mode != crate::model::params::DurationMode::Unit => seg
            .regions
            .iter()
            .map(|r| r.duration)
            .max()
            .unwrap_or(1)
            .max(base),
        _ => base,
    }
}

/// Objective of one video and its gradient with respect to the raw
/// parameters.
pub fn video_objective_and_gradient(
    params: &ModelParams,
    raw: &RawParams,
    item: &TrainItem,
    objective: Objective,
) -> Result<(f64, RawParams)> {
    let d_max = item_max_duration(params, item);
    let lattice = Lattice::with_max_duration(params, item.features, item.mask, d_max)?;
    let expected = lattice.expected_counts();
    let (value, counts) = match objective {
        Objective::Marginal => (expected.log_z, expected),
        Objective::Conditional => {
            let reference = item.reference.as_ref().ok_or_else(|| {
                Error::Config(format!("video {} has no reference for the conditional objective", item.id))
            })?;
            let observed = lattice.path_counts(reference)?;
            (observed.log_z - expected.log_z, difference(&observed, &expected))
        }
    };
    if !value.is_finite() {
        return Ok((value, raw.zeros_like()));
    }
    Ok((value, chain_rule(params, raw, &counts, item.features)))
}

fn difference(a: &Counts, b: &Counts) -> Counts {
    let sub = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<_>>();
    Counts {
        n: a.n,
        d_max: a.d_max,
        init: sub(&a.init, &b.init),
        trans: sub(&a.trans, &b.trans),
        dur: sub(&a.dur, &b.dur),
        dur_last: sub(&a.dur_last, &b.dur_last),
        occupancy: sub(&a.occupancy, &b.occupancy),
        log_z: a.log_z - b.log_z,
    }
}

/// Maps derivatives with respect to lattice potentials (the counts) onto
/// the raw parameters, summing over states that share a slot.
fn chain_rule(params: &ModelParams, raw: &RawParams, counts: &Counts, features: ArrayView2<f64>) -> RawParams {
    let space: &StateSpace = &params.space;
    let structure = params.state_structure();
    let n = counts.n;
    let d_max = counts.d_max;
    let mut grad = raw.zeros_like();

    let init_total: f64 = (0..n).filter(|&e| space.initial[e]).map(|e| counts.init[e]).sum();
    for e in 0..n {
        if space.initial[e] && structure.init[e].is_finite() {
            let p = structure.init[e].exp();
            grad.init[space.slots[e]] += counts.init[e] - p * init_total;
        }
    }
    for q in 0..n {
        let row_total: f64 = (0..n)
            .filter(|&r| space.transitions[q][r])
            .map(|r| counts.trans[q * n + r])
            .sum();
        for r in 0..n {
            let lp = structure.trans[q * n + r];
            if space.transitions[q][r] && lp.is_finite() {
                grad.trans[[space.slots[q], space.slots[r]]] += counts.trans[q * n + r] - lp.exp() * row_total;
            }
        }
    }

    let n_slots = params.n_slots();
    let tables: Vec<(Vec<f64>, Vec<f64>)> =
        (0..n_slots).map(|k| lambda_gradient_tables(params, k, d_max)).collect();
    for e in 0..n {
        let k = space.slots[e];
        let (regular, last) = &tables[k];
        let mut g = 0.0;
        for d in 0..d_max {
            g += counts.dur[e * d_max + d] * regular[d] + counts.dur_last[e * d_max + d] * last[d];
        }
        grad.lambda[k] += g * sigmoid(raw.lambda[k]);
    }

    let dim = params.dim();
    let mut weighted = Array2::<f64>::zeros((n_slots, dim));
    let mut mass = vec![0.0; n_slots];
    for (t, x) in features.rows().into_iter().enumerate() {
        for e in 0..n {
            let w = counts.occupancy[t * n + e];
            if w == 0.0 {
                continue;
            }
            let k = space.slots[e];
            mass[k] += w;
            for (f, &xf) in x.iter().enumerate() {
                weighted[[k, f]] += w * xf;
            }
        }
    }
    for k in 0..n_slots {
        for f in 0..dim {
            grad.means[[k, f]] = (weighted[[k, f]] - mass[k] * params.means[[k, f]]) / params.variances[f];
        }
    }
    grad
}

/// Summed objective and gradient over `items`, reduced in ascending id
/// order.
pub fn objective_and_gradient(
    template: &ModelParams,
    raw: &RawParams,
    items: &[TrainItem],
    objective: Objective,
) -> Result<(f64, RawParams)> {
    let params = raw.to_params(template);
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[a].id.cmp(items[b].id));
    let parts: Vec<Result<(f64, RawParams)>> = order
        .par_iter()
        .map(|&i| video_objective_and_gradient(&params, raw, &items[i], objective))
        .collect();
    let mut total = 0.0;
    let mut grad = raw.zeros_like();
    for part in parts {
        let (v, g) = part?;
        total += v;
        grad.add_assign(&g);
    }
    Ok((total, grad))
}

/// Summed objective without gradients.
pub fn objective_value(params: &ModelParams, items: &[TrainItem], objective: Objective) -> Result<f64> {
    let values: Vec<Result<f64>> = items
        .par_iter()
        .map(|item| {
            let d_max = item_max_duration(params, item);
            let lattice = Lattice::with_max_duration(params, item.features, item.mask, d_max)?;
            let log_z = lattice.log_marginal();
            match objective {
                Objective::Marginal => Ok(log_z),
                Objective::Conditional => {
                    let reference = item.reference.as_ref().ok_or_else(|| {
                        Error::Config(format!("video {} has no reference", item.id))
                    })?;
                    Ok(lattice.score(reference)? - log_z)
                }
            }
        })
        .collect();
    values.into_iter().sum()
}

/// Adam, ascending.
#[derive(Debug, Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    fn ascend(&mut self, theta: &mut [f64], grad: &[f64], lr: f64, cfg: &TrainConfig) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        for i in 0..theta.len() {
            let g = grad[i];
            if !theta[i].is_finite() || !g.is_finite() {
                continue;
            }
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] += lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the best epoch objective.
    pub params: ModelParams,
    /// Objective over the whole training set: before training, then after
    /// every epoch.
    pub history: Vec<f64>,
    pub final_learning_rate: f64,
}

pub fn train(
    init: &ModelParams,
    items: &[TrainItem],
    objective: Objective,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if items.is_empty() {
        return Err(Error::Validation("no training videos".into()));
    }
    let mut raw = RawParams::from_params(init);
    let mut adam = Adam::new(raw.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut lr = config.learning_rate;

    let start = objective_value(&raw.to_params(init), items, objective)?;
    if !start.is_finite() {
        return Err(Error::NonFiniteObjective {
            epoch: 0,
            batch: 0,
            value: start,
        });
    }
    let mut history = vec![start];
    let mut best = (start, raw.to_params(init));
    let mut stale = 0;
    let mut order: Vec<usize> = (0..items.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<TrainItem> = chunk.iter().map(|&i| items[i].clone()).collect();
            let (value, grad) = objective_and_gradient(init, &raw, &batch, objective)?;
            if !value.is_finite() {
                return Err(Error::NonFiniteObjective {
                    epoch,
                    batch: b,
                    value,
                });
            }
            let mut theta = raw.to_vec();
            adam.ascend(&mut theta, &grad.to_vec(), lr, config);
            raw.set_from_slice(&theta);
        }
        let params = raw.to_params(init);
        let value = objective_value(&params, items, objective)?;
        if !value.is_finite() {
            return Err(Error::NonFiniteObjective { epoch, batch: 0, value });
        }
        history.push(value);
        if value > best.0 {
            best = (value, params);
            stale = 0;
        } else {
            stale += 1;
            if stale > config.patience {
                lr *= config.decay;
                stale = 0;
            }
        }
        if lr < config.min_learning_rate {
            break;
        }
    }
    Ok(TrainOutcome {
        params: best.1,
        history,
        final_learning_rate: lr,
    })
}

/// Maximizes the log marginal likelihood of unlabelled videos.
pub fn train_unsupervised(init: &ModelParams, items: &[TrainItem], config: &TrainConfig) -> Result<TrainOutcome> {
    train(init, items, Objective::Marginal, config)
}

/// Maximizes the log conditional likelihood of the reference segmentations.
pub fn train_discriminative(init: &ModelParams, items: &[TrainItem], config: &TrainConfig) -> Result<TrainOutcome> {
    if let Some(item) = items.iter().find(|i| i.reference.is_none()) {
        return Err(Error::Validation(format!("video {} has no reference labels", item.id)));
    }
    train(init, items, Objective::Conditional, config)
}

/// Random starting point for gradient training.
///
/// Structural scores are small Gaussian noise, every duration mean is the
/// average video length divided by the number of slots, and emission means
/// are distinct training frames chosen by k-means++ seeding.
pub fn random_init(
    labels: Vec<Label>,
    videos: &[ArrayView2<f64>],
    variances: &[f64],
    space: StateSpace,
    durations: DurationConfig,
    config: &TrainConfig,
) -> Result<ModelParams> {
    let n = labels.len();
    let dim = variances.len();
    let frames: usize = videos.iter().map(|v| v.nrows()).sum();
    if frames < n {
        return Err(Error::Validation(format!("{frames} frames cannot seed {n} emission means")));
    }
    if let Some(v) = videos.iter().find(|v| v.ncols() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: v.ncols(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut noise = |len: usize| -> Vec<f64> {
        (0..len)
            .map(|_| config.init_noise * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let all = vec![true; n];
    let init_log = masked_log_softmax(&noise(n), &all);
    let mut trans_log = Array2::zeros((n, n));
    for i in 0..n {
        for (j, v) in masked_log_softmax(&noise(n), &all).into_iter().enumerate() {
            trans_log[[i, j]] = v;
        }
    }
    let mean_len = frames as f64 / videos.len() as f64;
    let lambdas = vec![(mean_len / n as f64).max(1.0); n];

    let pooled: Vec<ndarray::ArrayView1<f64>> = videos.iter().flat_map(|v| v.rows().into_iter()).collect();
    let chosen = kmeans_plus_plus(&pooled, n, variances, &mut rng);
    let mut means = Array2::zeros((n, dim));
    for (k, &i) in chosen.iter().enumerate() {
        means.row_mut(k).assign(&pooled[i]);
    }
    let mut params = ModelParams::new(labels, init_log, trans_log, lambdas, means, variances.to_vec())?;
    params.durations = durations;
    params.space = space;
    params.validate()?;
    Ok(params)
}

/// Indices of `k` distinct rows chosen with probability proportional to the
/// variance-scaled squared distance to the nearest row already chosen.
fn kmeans_plus_plus<R: Rng + ?Sized>(
    rows: &[ndarray::ArrayView1<f64>],
    k: usize,
    variances: &[f64],
    rng: &mut R,
) -> Vec<usize> {
    let dist = |a: &ndarray::ArrayView1<f64>, b: &ndarray::ArrayView1<f64>| -> f64 {
        a.iter()
            .zip(b.iter())
            .zip(variances)
            .map(|((x, y), v)| (x - y) * (x - y) / v)
            .sum()
    };
    let mut chosen = vec![rng.random_range(0..rows.len())];
    let mut nearest: Vec<f64> = rows.iter().map(|r| dist(r, &rows[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if u < w {
                        break;
                    }
                    u -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            // All remaining rows coincide with chosen ones; take any unused index.
            (0..rows.len()).find(|i| !chosen.contains(i)).expect("rows >= k")
        };
        chosen.push(next);
        for (i, r) in rows.iter().enumerate() {
            nearest[i] = nearest[i].min(dist(r, &rows[next]));
        }
    }
    chosen
}
