//! Synthetic datasets sampled from known model parameters.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{build_ordered_space, constrain_params};
use crate::data::{AnnotatedInterval, Dataset, Interval, Label, NarrationConstraints, Segmentation, TaskDefinition, VideoInstance};
use crate::error::{Error, Result};
use crate::model::params::{DurationConfig, DurationLimit, ModelParams};
use crate::model::sample::{expected_occupancy, sample_features, sample_segmentation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub tasks: usize,
    /// Steps per task.
    pub steps: usize,
    pub videos_per_task: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Pairwise distance between emission means, in standard deviations.
    pub separation: f64,
    /// Feature dimension; at least `steps + 1`.
    pub dim: usize,
    /// Target expected fraction of background timesteps per video.
    pub background_fraction: f64,
    /// Mean step duration.
    pub step_duration: f64,
    /// Sample from the ordered state space: every step once, in order.
    pub ordered: bool,
    /// Attach narration constraints: each true step region widened by
    /// `narration_slack` timesteps on both sides.
    pub narration: bool,
    pub narration_slack: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            tasks: 1,
            steps: 3,
            videos_per_task: 50,
            min_len: 40,
            max_len: 80,
            separation: 5.0,
            dim: 4,
            background_fraction: 0.5,
            step_duration: 8.0,
            ordered: false,
            narration: false,
            narration_slack: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    /// Generating parameters per task, with any ordering applied.
    pub truth: BTreeMap<String, ModelParams>,
    /// Sampled label segmentation per video id.
    pub segmentations: BTreeMap<String, Segmentation>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.separation > 0.0) {
            return Err(Error::Config(format!("separation {} must be > 0", self.separation)));
        }
        if self.steps == 0 || self.tasks == 0 {
            return Err(Error::Config("need at least one task and one step".into()));
        }
        if self.dim < self.steps + 1 {
            return Err(Error::Infeasible(format!(
                "{} labels cannot be equidistant in {} dimensions",
                self.steps + 1,
                self.dim
            )));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::Config(format!("bad length range [{}, {}]", self.min_len, self.max_len)));
        }
        if !(self.background_fraction > 0.0 && self.background_fraction < 1.0) {
            return Err(Error::Config(format!(
                "background fraction {} must be in (0, 1)",
                self.background_fraction
            )));
        }
        if !(self.step_duration > 0.0) {
            return Err(Error::Config("step duration must be > 0".into()));
        }
        if self.ordered && self.min_len < self.steps {
            return Err(Error::Infeasible(format!(
                "videos of {} timesteps cannot hold {} ordered steps",
                self.min_len, self.steps
            )));
        }
        Ok(())
    }
}

/// Structure for one task. Free: any step starts, steps are followed by
/// background, background by a uniformly chosen step. Ordered: the ordered
/// space with even odds of background between steps.
fn structure(task: &TaskDefinition, spec: &SynthSpec, lambda_bkg: f64) -> Result<ModelParams> {
    let s = spec.steps;
    let n = s + 1;
    let labels = task.labels();
    let ln = f64::ln;
    let mut init = vec![-(n as f64).ln(); n];
    let mut trans = Array2::from_elem((n, n), f64::NEG_INFINITY);
    if spec.ordered {
        init = vec![f64::NEG_INFINITY; n];
        init[0] = ln(0.5);
        init[s] = ln(0.5);
        for j in 0..s {
            if j + 1 < s {
                trans[[j, j + 1]] = ln(0.5);
                trans[[j, s]] = ln(0.5);
            } else {
                trans[[j, s]] = 0.0;
            }
        }
        trans.row_mut(s).fill(-(n as f64).ln());
    } else {
        for j in 0..s {
            trans[[j, s]] = 0.0;
            trans[[s, j]] = -(s as f64).ln();
        }
    }
    let half = spec.separation / std::f64::consts::SQRT_2;
    let means = Array2::from_shape_fn((n, spec.dim), |(k, f)| if f == k { half } else { 0.0 });
    let mut lambdas = vec![spec.step_duration; n];
    lambdas[s] = lambda_bkg;
    // A length-independent duration limit keeps prefixes of long videos
    // distributed like short videos.
    let limit = lambdas.iter().map(|&l| (l + 6.0 * l.sqrt()).ceil() as usize).max().unwrap_or(1);
    let params = ModelParams::new(labels, init, trans, lambdas, means, vec![1.0; spec.dim])?.with_durations(
        DurationConfig {
            limit: DurationLimit::Fixed(limit.max(1)),
            ..DurationConfig::default()
        },
    );
    if spec.ordered {
        constrain_params(&params, &build_ordered_space(task))
    } else {
        Ok(params)
    }
}

/// Mean over video lengths of the expected background fraction. Durations
/// do not depend on the video length, so one occupancy table serves every
/// length.
fn expected_background(params: &ModelParams, spec: &SynthSpec) -> f64 {
    let bkg_states: Vec<usize> = (0..params.n_states())
        .filter(|&r| params.state_label(r).is_background())
        .collect();
    let occ = expected_occupancy(params, spec.max_len);
    let mut cumulative = 0.0;
    let mut total = 0.0;
    for t in 0..spec.max_len {
        cumulative += bkg_states.iter().map(|&r| occ[[t, r]]).sum::<f64>();
        if t + 1 >= spec.min_len {
            total += cumulative / (t + 1) as f64;
        }
    }
    total / (spec.max_len - spec.min_len + 1) as f64
}

/// Background duration mean giving the requested background fraction.
fn calibrate_background(task: &TaskDefinition, spec: &SynthSpec) -> Result<f64> {
    let (mut lo, mut hi) = (0.05f64.ln(), (4.0 * spec.max_len as f64).ln());
    let frac = |log_l: f64| -> Result<f64> { Ok(expected_background(&structure(task, spec, log_l.exp())?, spec)) };
    let (f_lo, f_hi) = (frac(lo)?, frac(hi)?);
    let target = spec.background_fraction;
    if target < f_lo || target > f_hi {
        return Err(Error::Infeasible(format!(
            "background fraction {target} outside reachable range [{f_lo:.3}, {f_hi:.3}]"
        )));
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if frac(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

fn f32_round(x: Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v as f32 as f64)
}

pub fn synth_generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut tasks = Vec::new();
    let mut videos = Vec::new();
    let mut truth = BTreeMap::new();
    let mut segmentations = BTreeMap::new();
    for ti in 0..spec.tasks {
        let task_id = format!("task{ti:02}");
        let task = TaskDefinition::new(&task_id, (0..spec.steps).map(|j| format!("step{j}")).collect())?;
        let lambda_bkg = calibrate_background(&task, spec)?;
        let params = structure(&task, spec, lambda_bkg)?;
        for vi in 0..spec.videos_per_task {
            let t_len = rng.random_range(spec.min_len..=spec.max_len);
            let states = sample_segmentation(&params, t_len, &mut rng);
            let features = f32_round(sample_features(&params, &states, &mut rng));
            let seg = states.map(|s| params.state_label(s)).coalesce();
            let mut reference = Vec::new();
            let mut narration = NarrationConstraints::new();
            for (label, start, end) in seg.spans() {
                if let Label::Step(j) = label {
                    reference.push(AnnotatedInterval::new(j, start, end));
                    if spec.narration {
                        let iv = Interval::new(start.saturating_sub(spec.narration_slack), (end + spec.narration_slack).min(t_len));
                        narration.entry(j).or_insert_with(Vec::new).push(iv);
                    }
                }
            }
            let id = format!("{task_id}_v{vi:03}");
            let mut video = VideoInstance::new(&id, &task_id, features).with_reference(reference);
            if spec.narration {
                video = video.with_narration(narration);
            }
            videos.push(video);
            segmentations.insert(id, seg);
        }
        tasks.push(task);
        truth.insert(task_id, params);
    }
    Ok(SynthOutput {
        dataset: Dataset::new(tasks, videos),
        truth,
        segmentations,
    })
}
