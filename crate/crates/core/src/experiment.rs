//! End-to-end runs: features, training or baseline, decoding, metrics.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{ordered_uniform, predict_background, sample_from_train, TaskStats};
use crate::constraints::{build_ordered_space, merge_background, narration_mask, OrderedStateSpace};
use crate::data::{resolve_multilabel, Dataset, FrameLabeling, Label, Segmentation, Split, TaskDefinition, VideoInstance};
use crate::error::{Error, Result};
use crate::eval::{aggregate, evaluate_video, state_label_mapping, EvalReport, Metrics, TaskRow, VideoEval};
use crate::features::{empirical_diag_cov, pca_fit_task, transform_with, FeatureGroupSpec, GroupPca, PcaModel, DEFAULT_VARIANCE_FLOOR};
use crate::io::model::{save_model, ModelBundle, ParamsRecord, TaskModel};
use crate::io::predictions::{save_predictions, write_report, PredictionFile, PredictionRecord, RunMetadata};
use crate::model::lattice::{EmissionMask, Lattice};
use crate::model::params::{DurationConfig, ModelParams, StateSpace};
use crate::model::supervised::{fit_supervised_generative, DEFAULT_SMOOTHING};
use crate::model::train::{random_init, train_discriminative, train_unsupervised, TrainConfig, TrainItem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "unsup")]
    Unsupervised,
    #[serde(rename = "gen-sup")]
    GenerativeSupervised,
    #[serde(rename = "disc-sup")]
    DiscriminativeSupervised,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraints {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "ord")]
    Ordering,
    #[serde(rename = "narr")]
    Narration,
    #[serde(rename = "ord+narr")]
    Both,
}

impl Constraints {
    pub fn ordering(self) -> bool {
        matches!(self, Constraints::Ordering | Constraints::Both)
    }

    pub fn narration(self) -> bool {
        matches!(self, Constraints::Narration | Constraints::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Bkg,
    Sample,
    Uniform,
}

/// Missing fields take their default values when deserializing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub baseline: Option<Baseline>,
    pub constraints: Constraints,
    pub train: TrainConfig,
    /// Empty means the raw features are used as they are.
    pub pca: Vec<FeatureGroupSpec>,
    pub durations: DurationConfig,
    pub smoothing: f64,
    pub variance_floor: f64,
    pub narration_penalty: f64,
    /// Apply narration masks when decoding evaluation videos too.
    pub narration_at_test: bool,
    /// Background fraction for the uniform baseline; defaults to the
    /// training corpus value.
    pub background_fraction: Option<f64>,
    /// Unsupervised training runs from this many random starts and keeps
    /// the one with the highest training objective.
    pub restarts: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Some(Mode::Unsupervised),
            baseline: None,
            constraints: Constraints::None,
            train: TrainConfig::default(),
            pca: Vec::new(),
            durations: DurationConfig::default(),
            smoothing: DEFAULT_SMOOTHING,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
            narration_penalty: EmissionMask::DEFAULT_PENALTY,
            narration_at_test: false,
            background_fraction: None,
            restarts: 1,
            seed: 0,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        match (self.mode, self.baseline) {
            (Some(_), Some(_)) => return Err(Error::Config("a run uses either a training mode or a baseline".into())),
            (None, None) => return Err(Error::Config("choose a training mode or a baseline".into())),
            _ => {}
        }
        if matches!(
            self.mode,
            Some(Mode::GenerativeSupervised | Mode::DiscriminativeSupervised)
        ) && self.constraints != Constraints::None
        {
            return Err(Error::Config("constraints apply to unsupervised training only".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.baseline.is_some() && self.constraints != Constraints::None {
            return Err(Error::Config("baselines take no constraints".into()));
        }
        if let Some(f) = self.background_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("background fraction {f} outside [0, 1]")));
            }
        }
        self.train.validate()
    }

    pub fn system_name(&self) -> String {
        match (self.mode, self.baseline) {
            (_, Some(b)) => format!("{b:?}").to_lowercase(),
            (Some(m), None) => {
                let m = serde_json::to_value(m).expect("mode serializes");
                let c = serde_json::to_value(self.constraints).expect("constraints serialize");
                format!("{}:{}", m.as_str().unwrap_or(""), c.as_str().unwrap_or(""))
            }
            (None, None) => "none".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: EvalReport,
    pub videos: Vec<VideoEval>,
    pub predictions: PredictionFile,
    pub models: ModelBundle,
    /// Non-fatal problems, e.g. videos too short for their task.
    pub warnings: Vec<String>,
}

/// Videos tagged `train` train, videos tagged `test` are evaluated, and
/// untagged videos do both.
fn split_videos<'a>(ds: &'a Dataset, task: &str) -> (Vec<&'a VideoInstance>, Vec<&'a VideoInstance>) {
    let videos: Vec<&VideoInstance> = ds.videos.iter().filter(|v| v.task_id == task).collect();
    let train = videos.iter().copied().filter(|v| v.split != Some(Split::Test)).collect();
    let test = videos.iter().copied().filter(|v| v.split != Some(Split::Train)).collect();
    (train, test)
}

fn stage<T>(stage: &str, task: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Validation(m) => Error::Validation(format!("{stage} ({task}): {m}")),
        Error::Config(m) => Error::Config(format!("{stage} ({task}): {m}")),
        other => other,
    })
}

fn references(task: &TaskDefinition, videos: &[&VideoInstance]) -> Result<Vec<Option<FrameLabeling>>> {
    videos
        .iter()
        .map(|v| v.reference.as_ref().map(|_| resolve_multilabel(v, task)).transpose())
        .collect()
}

fn task_seed(seed: u64, task_index: usize) -> u64 {
    seed.wrapping_add((task_index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn project(groups: Option<&Vec<GroupPca>>, v: &VideoInstance) -> Result<Array2<f64>> {
    match groups {
        Some(groups) => transform_with(groups, v.features.view()),
        None => Ok(v.features.clone()),
    }
}

fn check_dataset(ds: &Dataset, config: &RunConfig) -> Result<()> {
    ds.validate().into_result()?;
    if config.constraints.narration() && !ds.videos.iter().any(|v| v.narration.is_some()) {
        return Err(Error::Config("narration constraints requested but the dataset has none".into()));
    }
    Ok(())
}

fn fit_task(
    ds: &Dataset,
    task: &TaskDefinition,
    task_index: usize,
    config: &RunConfig,
    warnings: &mut Vec<String>,
) -> Result<(TaskModel, Option<Vec<GroupPca>>)> {
    let (train, _) = split_videos(ds, &task.id);
    if train.is_empty() {
        return Err(Error::Validation(format!("task {} has no training videos", task.id)));
    }
    let pca = if config.pca.is_empty() {
        None
    } else {
        Some(stage("pca", &task.id, pca_fit_task(&task.id, &train, &config.pca))?)
    };
    let train_x: Vec<Array2<f64>> = train.iter().map(|v| project(pca.as_ref(), v)).collect::<Result<_>>()?;
    let train_refs = stage("labels", &task.id, references(task, &train))?;
    let labels = task.labels();
    let views: Vec<ArrayView2<f64>> = train_x.iter().map(|x| x.view()).collect();
    let variances = stage("covariance", &task.id, empirical_diag_cov(&views, config.variance_floor))?.variances;
    let ordered: Option<OrderedStateSpace> = config.constraints.ordering().then(|| build_ordered_space(task));
    let mut train_cfg = config.train.clone();
    train_cfg.seed = task_seed(config.seed, task_index);

    let mut supervised_fit = || -> Result<ModelParams> {
        let pairs: Vec<(ArrayView2<f64>, &FrameLabeling)> = train_x
            .iter()
            .zip(&train_refs)
            .filter_map(|(x, r)| r.as_ref().map(|r| (x.view(), r)))
            .collect();
        if pairs.is_empty() {
            return Err(Error::Validation("no labelled training videos".into()));
        }
        let (params, report) = fit_supervised_generative(&labels, &pairs, &variances, config.smoothing)?;
        if !report.unseen_labels.is_empty() {
            let names: Vec<String> = report.unseen_labels.iter().map(|l| l.to_string()).collect();
            warnings.push(format!("task {}: labels never observed in training: {}", task.id, names.join(", ")));
        }
        Ok(params.with_durations(config.durations))
    };

    let params = match config.mode.expect("validated") {
        Mode::GenerativeSupervised => stage("train", &task.id, supervised_fit())?,
        Mode::DiscriminativeSupervised => {
            let init = stage("train", &task.id, supervised_fit())?;
            let items: Vec<TrainItem> = train
                .iter()
                .zip(&train_x)
                .zip(&train_refs)
                .filter_map(|((v, x), r)| {
                    r.as_ref().map(|r| {
                        let seg = r.to_segmentation().map(|l| labels.iter().position(|&x| x == l).expect("task label"));
                        TrainItem::new(&v.id, x.view()).with_reference(seg)
                    })
                })
                .collect();
            stage("train", &task.id, train_discriminative(&init, &items, &train_cfg))?.params
        }
        Mode::Unsupervised => {
            let space = match &ordered {
                Some(o) => o.to_state_space(&labels)?,
                None => StateSpace::unconstrained(labels.len()),
            };
            let masks: Vec<Option<EmissionMask>> = if config.constraints.narration() {
                train
                    .iter()
                    .map(|v| match &v.narration {
                        Some(c) => narration_mask(v, c, &labels, ordered.as_ref(), config.narration_penalty).map(Some),
                        None => Err(Error::Validation(format!("video {} has no narration constraints", v.id))),
                    })
                    .collect::<Result<_>>()?
            } else {
                vec![None; train.len()]
            };
            let items: Vec<TrainItem> = train
                .iter()
                .zip(&train_x)
                .zip(&masks)
                .map(|((v, x), m)| {
                    let item = TrainItem::new(&v.id, x.view());
                    match m {
                        Some(m) => item.with_mask(m),
                        None => item,
                    }
                })
                .collect();
            let mut best: Option<(f64, ModelParams)> = None;
            for restart in 0..config.restarts as u64 {
                let cfg = TrainConfig {
                    seed: train_cfg.seed.wrapping_add(restart),
                    ..train_cfg.clone()
                };
                let init = stage(
                    "init",
                    &task.id,
                    random_init(labels.clone(), &views, &variances, space.clone(), config.durations, &cfg),
                )?;
                let outcome = stage("train", &task.id, train_unsupervised(&init, &items, &cfg))?;
                let value = outcome.history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if best.as_ref().is_none_or(|(b, _)| value > *b) {
                    best = Some((value, outcome.params));
                }
            }
            best.expect("at least one restart").1
        }
    };
    let base = ModelParams {
        space: StateSpace::unconstrained(params.n_slots()),
        ..params
    };
    let model = TaskModel {
        task: task.clone(),
        params: ParamsRecord::new(&base, ordered.as_ref()),
        mapping: None,
        background_fraction: None,
    };
    Ok((model, pca))
}

/// Trains one model per task on its training videos. Baseline configs
/// have nothing to train.
pub fn train_models(ds: &Dataset, config: &RunConfig) -> Result<(ModelBundle, Vec<String>)> {
    config.validate()?;
    if config.mode.is_none() {
        return Err(Error::Config("baselines have no trainable model".into()));
    }
    check_dataset(ds, config)?;
    let mut bundle = ModelBundle::default();
    let mut pca = PcaModel::default();
    let mut warnings = Vec::new();
    for (i, task) in ds.tasks.iter().enumerate() {
        if ds.videos_of(&task.id).next().is_none() {
            continue;
        }
        let (model, groups) = fit_task(ds, task, i, config, &mut warnings)?;
        bundle.tasks.insert(task.id.clone(), model);
        if let Some(g) = groups {
            pca.tasks.insert(task.id.clone(), g);
        }
    }
    if !pca.tasks.is_empty() {
        bundle.pca = Some(pca);
    }
    let meta = RunMetadata::new(Some(config.seed), config);
    bundle.metadata.insert("config_sha256".into(), meta.config_sha256);
    bundle.metadata.insert("seed".into(), config.seed.to_string());
    bundle.metadata.insert("system".into(), config.system_name());
    Ok((bundle, warnings))
}

/// Options for decoding with a trained bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeOptions {
    /// Apply narration masks, when videos carry constraints.
    pub narration: bool,
    pub narration_penalty: f64,
    /// Decode every video rather than the evaluation split only.
    pub all_videos: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            narration: false,
            narration_penalty: EmissionMask::DEFAULT_PENALTY,
            all_videos: false,
        }
    }
}

/// Decodes the evaluation videos of every task in `bundle`. Videos with no
/// feasible segmentation are predicted as background and reported in the
/// warnings.
pub fn predict_with_models(
    ds: &Dataset,
    bundle: &ModelBundle,
    options: &DecodeOptions,
) -> Result<(Vec<PredictionRecord>, Vec<String>)> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (task_id, model) in &bundle.tasks {
        let params = stage("model", task_id, model.params.to_params())?;
        let ordered = model.params.ordered.as_ref();
        let groups = bundle.pca.as_ref().and_then(|p| p.tasks.get(task_id));
        let (train, test) = split_videos(ds, task_id);
        let videos = if options.all_videos {
            let mut all = train;
            all.extend(test.into_iter().filter(|v| v.split.is_some()));
            all
        } else {
            test
        };
        let mut videos = videos;
        videos.sort_by(|a, b| a.id.cmp(&b.id));
        let decoded: Vec<Result<Option<Segmentation<usize>>>> = videos
            .par_iter()
            .map(|v| {
                let x = project(groups, v)?;
                let mask = match (&v.narration, options.narration) {
                    (Some(c), true) => Some(narration_mask(v, c, &model.params.labels, ordered, options.narration_penalty)?),
                    _ => None,
                };
                Ok(Lattice::new(&params, x.view(), mask.as_ref())?.viterbi().map(|(seg, _)| seg))
            })
            .collect();
        for (v, seg) in videos.iter().zip(decoded) {
            let segmentation = match stage("decode", task_id, seg)? {
                Some(seg) => match (&model.mapping, ordered) {
                    (Some(m), _) => seg.map(|s| m[params.space.slots[s]]).coalesce(),
                    (None, Some(o)) => merge_background(&seg, o),
                    (None, None) => seg.map(|s| params.state_label(s)).coalesce(),
                },
                None => {
                    warnings.push(format!(
                        "video {}: no feasible segmentation of {} timesteps; predicting background",
                        v.id,
                        v.len()
                    ));
                    predict_background(v.len()).to_segmentation()
                }
            };
            records.push(PredictionRecord {
                video_id: v.id.clone(),
                task_id: task_id.clone(),
                segmentation,
            });
        }
    }
    Ok((records, warnings))
}

/// Baseline predictions for the evaluation videos of every task.
pub fn predict_baseline(ds: &Dataset, config: &RunConfig) -> Result<(Vec<PredictionRecord>, Vec<String>)> {
    config.validate()?;
    let baseline = config
        .baseline
        .ok_or_else(|| Error::Config("no baseline configured".into()))?;
    check_dataset(ds, config)?;
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (i, task) in ds.tasks.iter().enumerate() {
        let (train, test) = split_videos(ds, &task.id);
        if test.is_empty() {
            continue;
        }
        let train_refs = stage("labels", &task.id, references(task, &train))?;
        let labelled: Vec<&FrameLabeling> = train_refs.iter().flatten().collect();
        let stats = || stage("baseline", &task.id, TaskStats::from_frames(task.n_steps(), labelled.iter().copied()));
        let mut rng = ChaCha8Rng::seed_from_u64(task_seed(config.seed, i));
        let segs: Vec<Segmentation> = match baseline {
            Baseline::Bkg => test.iter().map(|v| predict_background(v.len()).to_segmentation()).collect(),
            Baseline::Sample => {
                let stats = stats()?;
                test.iter()
                    .map(|v| sample_from_train(&stats, v.len(), rng.random()).to_segmentation())
                    .collect()
            }
            Baseline::Uniform => {
                let bf = match config.background_fraction {
                    Some(f) => f,
                    None => stats()?.background_fraction,
                };
                test.iter()
                    .map(|v| match ordered_uniform(task.n_steps(), v.len(), bf) {
                        Ok(seg) => seg,
                        Err(e) => {
                            warnings.push(format!("video {}: {e}; predicting background", v.id));
                            predict_background(v.len()).to_segmentation()
                        }
                    })
                    .collect()
            }
        };
        for (v, segmentation) in test.iter().zip(segs) {
            records.push(PredictionRecord {
                video_id: v.id.clone(),
                task_id: task.id.clone(),
                segmentation,
            });
        }
    }
    Ok((records, warnings))
}

/// Relabels the predictions of each task with the one-to-one label
/// matching that maximizes pooled frame accuracy against the references.
/// Returns the matching per task as predicted label to assigned label.
pub fn hungarian_relabel(
    ds: &Dataset,
    predictions: &mut [PredictionRecord],
) -> Result<BTreeMap<String, Vec<Label>>> {
    let mut mappings = BTreeMap::new();
    for task in &ds.tasks {
        let n = task.n_steps();
        let index: Vec<usize> = (0..predictions.len())
            .filter(|&i| predictions[i].task_id == task.id)
            .collect();
        let mut pairs = Vec::new();
        for &i in &index {
            let Some(v) = ds.videos.iter().find(|v| v.id == predictions[i].video_id) else {
                continue;
            };
            if v.reference.is_some() {
                let reference = resolve_multilabel(v, task)?;
                let states: Vec<usize> = predictions[i]
                    .segmentation
                    .to_frames()
                    .labels
                    .iter()
                    .map(|l| l.dense_index(n))
                    .collect();
                pairs.push((states, reference));
            }
        }
        if pairs.is_empty() {
            continue;
        }
        let refs: Vec<(&[usize], &FrameLabeling)> = pairs.iter().map(|(s, r)| (s.as_slice(), r)).collect();
        let mapping = state_label_mapping(&refs, n + 1, n)?;
        for &i in &index {
            let seg = &predictions[i].segmentation;
            predictions[i].segmentation = seg.map(|l| mapping[l.dense_index(n)]).coalesce();
        }
        mappings.insert(task.id.clone(), mapping);
    }
    Ok(mappings)
}

/// Scores predictions against the references in `ds`. Predictions for
/// unlabelled or unknown videos are skipped.
pub fn evaluate_predictions(ds: &Dataset, predictions: &[PredictionRecord]) -> Result<(EvalReport, Vec<VideoEval>)> {
    let by_id: BTreeMap<&str, &VideoInstance> = ds.videos.iter().map(|v| (v.id.as_str(), v)).collect();
    let mut evals = Vec::new();
    for p in predictions {
        let Some(v) = by_id.get(p.video_id.as_str()) else {
            continue;
        };
        if v.reference.is_none() {
            continue;
        }
        let task = ds
            .task(&v.task_id)
            .ok_or_else(|| Error::Validation(format!("video {} names unknown task {}", v.id, v.task_id)))?;
        let reference = resolve_multilabel(v, task)?;
        evals.push(evaluate_video(&v.id, &task.id, &p.segmentation.to_frames(), &reference)?);
    }
    let task_ids: Vec<String> = ds.tasks.iter().map(|t| t.id.clone()).collect();
    Ok((aggregate(&evals, &task_ids), evals))
}

/// Runs the configured pipeline over every task of `ds`.
pub fn run_experiment(ds: &Dataset, config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    check_dataset(ds, config)?;
    let (mut records, models, mut warnings) = if config.baseline.is_some() {
        let (records, warnings) = predict_baseline(ds, config)?;
        (records, ModelBundle::default(), warnings)
    } else {
        let (mut bundle, mut warnings) = train_models(ds, config)?;
        let options = DecodeOptions {
            narration: config.narration_at_test && config.constraints.narration(),
            narration_penalty: config.narration_penalty,
            all_videos: false,
        };
        let (mut records, w) = predict_with_models(ds, &bundle, &options)?;
        warnings.extend(w);
        if config.mode == Some(Mode::Unsupervised) && config.constraints == Constraints::None {
            for (task, mapping) in hungarian_relabel(ds, &mut records)? {
                if let Some(m) = bundle.tasks.get_mut(&task) {
                    let labels = &m.params.labels;
                    let n = m.task.n_steps();
                    m.mapping = Some(labels.iter().map(|l| mapping[l.dense_index(n)]).collect());
                }
            }
        }
        (records, bundle, warnings)
    };
    records.sort_by(|a, b| (&a.task_id, &a.video_id).cmp(&(&b.task_id, &b.video_id)));
    let (report, evals) = evaluate_predictions(ds, &records)?;
    warnings.sort();
    let out = RunOutput {
        report,
        videos: evals,
        predictions: PredictionFile::new(config.system_name(), records),
        models,
        warnings,
    };
    if let Some(dir) = &config.output_dir {
        write_outputs(&out, &RunMetadata::new(Some(config.seed), config), dir)?;
    }
    Ok(out)
}

fn write_outputs(out: &RunOutput, meta: &RunMetadata, dir: &std::path::Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_predictions(&out.predictions, &dir.join("predictions.json"))?;
    if !out.models.tasks.is_empty() {
        save_model(&out.models, &dir.join("model.stepseg"))?;
    }
    write_report(&out.report, meta, &dir.join("report.jsonl"))
}

/// Mean of several reports, task by task; the average row is the
/// unweighted mean of the averaged task rows.
pub fn average_reports(reports: &[EvalReport]) -> EvalReport {
    let mut by_task: BTreeMap<&str, Vec<&TaskRow>> = BTreeMap::new();
    for r in reports {
        for row in &r.tasks {
            by_task.entry(row.task_id.as_str()).or_default().push(row);
        }
    }
    let tasks: Vec<TaskRow> = by_task
        .into_iter()
        .map(|(task, rows)| TaskRow {
            task_id: task.to_string(),
            videos: rows.iter().map(|r| r.videos).sum::<usize>() / rows.len(),
            metrics: Metrics::average(rows.iter().map(|r| &r.metrics)),
        })
        .collect();
    let mut excluded: Vec<String> = reports.iter().flat_map(|r| r.excluded_tasks.clone()).collect();
    excluded.sort();
    excluded.dedup();
    excluded.retain(|t| !tasks.iter().any(|r| &r.task_id == t));
    EvalReport {
        average: Metrics::average(tasks.iter().map(|r| &r.metrics)),
        tasks,
        excluded_tasks: excluded,
    }
}

/// Copy of `ds` where each task has `train_per_task` randomly chosen
/// training videos (without replacement) and the rest are test videos.
pub fn random_split(ds: &Dataset, train_per_task: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ds.clone();
    for task in &ds.tasks {
        let mut idx: Vec<usize> = (0..out.videos.len()).filter(|&i| out.videos[i].task_id == task.id).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() <= train_per_task {
            return Err(Error::Config(format!(
                "task {} has {} videos, cannot hold out any after {train_per_task} training videos",
                task.id,
                idx.len()
            )));
        }
        idx.sort_by(|&a, &b| out.videos[a].id.cmp(&out.videos[b].id));
        idx.shuffle(&mut rng);
        for (k, &i) in idx.iter().enumerate() {
            out.videos[i].split = Some(if k < train_per_task { Split::Train } else { Split::Test });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SplitsOutput {
    pub reports: Vec<EvalReport>,
    pub mean: EvalReport,
}

/// Repeats the run over `splits` random train/test splits and averages.
pub fn run_splits(ds: &Dataset, config: &RunConfig, splits: usize, train_per_task: usize) -> Result<SplitsOutput> {
    if splits == 0 {
        return Err(Error::Config("at least one split is required".into()));
    }
    let mut reports = Vec::with_capacity(splits);
    for k in 0..splits {
        let seed = config.seed.wrapping_add(k as u64);
        let split = random_split(ds, train_per_task, seed)?;
        let mut cfg = config.clone();
        cfg.seed = seed;
        cfg.output_dir = config.output_dir.as_ref().map(|d| d.join(format!("split{k:02}")));
        reports.push(run_experiment(&split, &cfg)?.report);
    }
    let mean = average_reports(&reports);
    if let Some(dir) = &config.output_dir {
        let meta = RunMetadata::new(Some(config.seed), config);
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_report(&mean, &meta, &dir.join("report.jsonl"))?;
    }
    Ok(SplitsOutput { reports, mean })
}
