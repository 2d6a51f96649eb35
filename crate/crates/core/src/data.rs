//! Tasks, videos, labels and segmentations.
//!
//! A video is a sequence of one-second timesteps, each carrying one feature
//! vector. A segmentation partitions those timesteps into labelled regions;
//! a frame labeling assigns one label per timestep. Intervals are half-open
//! `[start, end)` in timesteps throughout.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Region or timestep label. Step indices are local to the owning task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Step(usize),
    Background,
}

impl Label {
    pub fn is_background(self) -> bool {
        matches!(self, Label::Background)
    }

    pub fn step(self) -> Option<usize> {
        match self {
            Label::Step(j) => Some(j),
            Label::Background => None,
        }
    }

    /// Dense index over `S` steps plus background (background is `S`).
    pub fn dense_index(self, n_steps: usize) -> usize {
        match self {
            Label::Step(j) => j,
            Label::Background => n_steps,
        }
    }

    pub fn from_dense_index(index: usize, n_steps: usize) -> Label {
        if index >= n_steps {
            Label::Background
        } else {
            Label::Step(index)
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Step(j) => write!(f, "s{j}"),
            Label::Background => write!(f, "bkg"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDefinition {
    pub id: String,
    /// Step names in canonical order.
    pub steps: Vec<String>,
}

impl TaskDefinition {
    pub fn new(id: impl Into<String>, steps: Vec<String>) -> Result<Self> {
        let task = TaskDefinition {
            id: id.into(),
            steps,
        };
        let problems = task.problems();
        if let Some(first) = problems.into_iter().next() {
            return Err(Error::Validation(first.to_string()));
        }
        Ok(task)
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    /// Labels of the task: every step in canonical order, then background.
    pub fn labels(&self) -> Vec<Label> {
        (0..self.n_steps())
            .map(Label::Step)
            .chain(std::iter::once(Label::Background))
            .collect()
    }

    fn problems(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.steps.is_empty() {
            out.push(Violation::EmptyTask {
                task: self.id.clone(),
            });
        }
        let mut seen = HashSet::new();
        for name in &self.steps {
            if !seen.insert(name.as_str()) {
                out.push(Violation::DuplicateStep {
                    task: self.id.clone(),
                    step: name.clone(),
                });
            }
        }
        out
    }
}

/// Half-open interval of timesteps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Self {
        Interval { start, end }
    }

    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t < self.end
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn fits(&self, t_len: usize) -> bool {
        self.start < self.end && self.end <= t_len
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// One annotated step occurrence in a reference annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedInterval {
    pub step: usize,
    pub start: usize,
    pub end: usize,
}

impl AnnotatedInterval {
    pub fn new(step: usize, start: usize, end: usize) -> Self {
        AnnotatedInterval { step, start, end }
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.start, self.end)
    }
}

/// Allowed intervals per step index for one video.
pub type NarrationConstraints = BTreeMap<usize, Vec<Interval>>;

/// Contiguous block of feature columns produced by one extractor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoInstance {
    pub id: String,
    pub task_id: String,
    /// `T x F`, one row per one-second timestep.
    pub features: Array2<f64>,
    /// Column layout of `features`; the dims sum to `F`.
    pub groups: Vec<FeatureGroup>,
    pub reference: Option<Vec<AnnotatedInterval>>,
    pub narration: Option<NarrationConstraints>,
    pub split: Option<Split>,
}

impl VideoInstance {
    /// A video with a single feature group named `features`.
    pub fn new(id: impl Into<String>, task_id: impl Into<String>, features: Array2<f64>) -> Self {
        let dim = features.ncols();
        VideoInstance {
            id: id.into(),
            task_id: task_id.into(),
            features,
            groups: vec![FeatureGroup {
                name: "features".into(),
                dim,
            }],
            reference: None,
            narration: None,
            split: None,
        }
    }

    pub fn with_reference(mut self, reference: Vec<AnnotatedInterval>) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_narration(mut self, narration: NarrationConstraints) -> Self {
        self.narration = Some(narration);
        self
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region<L = Label> {
    pub label: L,
    pub duration: usize,
}

impl<L> Region<L> {
    pub fn new(label: L, duration: usize) -> Self {
        Region { label, duration }
    }
}

/// Ordered regions partitioning a video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation<L = Label> {
    pub regions: Vec<Region<L>>,
}

impl<L: Copy + PartialEq> Segmentation<L> {
    /// Builds a segmentation, rejecting empty regions.
    pub fn new(regions: Vec<Region<L>>) -> Result<Self> {
        if let Some(k) = regions.iter().position(|r| r.duration == 0) {
            return Err(Error::Validation(format!("region {k} has zero duration")));
        }
        Ok(Segmentation { regions })
    }

    /// Builds a segmentation and checks that it covers exactly `t_len` timesteps.
    pub fn with_length(regions: Vec<Region<L>>, t_len: usize) -> Result<Self> {
        let seg = Self::new(regions)?;
        if seg.len() != t_len {
            return Err(Error::Validation(format!(
                "regions cover {} timesteps, video has {t_len}",
                seg.len()
            )));
        }
        Ok(seg)
    }

    pub fn from_pairs(pairs: &[(L, usize)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(l, d)| Region::new(l, d)).collect())
    }

    /// Total duration.
    pub fn len(&self) -> usize {
        self.regions.iter().map(|r| r.duration).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn labels(&self) -> Vec<L> {
        self.regions.iter().map(|r| r.label).collect()
    }

    /// `(label, start, end)` for each region.
    pub fn spans(&self) -> Vec<(L, usize, usize)> {
        let mut start = 0;
        self.regions
            .iter()
            .map(|r| {
                let span = (r.label, start, start + r.duration);
                start += r.duration;
                span
            })
            .collect()
    }

    pub fn to_frames(&self) -> FrameLabeling<L> {
        segmentation_to_frames(self)
    }

    pub fn map<M: Copy + PartialEq>(&self, mut f: impl FnMut(L) -> M) -> Segmentation<M> {
        Segmentation {
            regions: self
                .regions
                .iter()
                .map(|r| Region::new(f(r.label), r.duration))
                .collect(),
        }
    }

    /// Merges adjacent regions that carry the same label.
    pub fn coalesce(&self) -> Segmentation<L> {
        let mut regions: Vec<Region<L>> = Vec::with_capacity(self.regions.len());
        for r in &self.regions {
            match regions.last_mut() {
                Some(last) if last.label == r.label => last.duration += r.duration,
                _ => regions.push(r.clone()),
            }
        }
        Segmentation { regions }
    }
}

/// One label per timestep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLabeling<L = Label> {
    pub labels: Vec<L>,
}

impl<L: Copy + PartialEq> FrameLabeling<L> {
    pub fn new(labels: Vec<L>) -> Self {
        FrameLabeling { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn to_segmentation(&self) -> Segmentation<L> {
        frames_to_segmentation(self)
    }
}

impl FrameLabeling<Label> {
    pub fn background(t_len: usize) -> Self {
        FrameLabeling::new(vec![Label::Background; t_len])
    }
}

pub fn segmentation_to_frames<L: Copy + PartialEq>(seg: &Segmentation<L>) -> FrameLabeling<L> {
    let mut labels = Vec::with_capacity(seg.len());
    for r in &seg.regions {
        labels.extend(std::iter::repeat_n(r.label, r.duration));
    }
    FrameLabeling { labels }
}

/// Maximal runs of equal labels become regions.
pub fn frames_to_segmentation<L: Copy + PartialEq>(frames: &FrameLabeling<L>) -> Segmentation<L> {
    let mut regions: Vec<Region<L>> = Vec::new();
    for &l in &frames.labels {
        match regions.last_mut() {
            Some(last) if last.label == l => last.duration += 1,
            _ => regions.push(Region::new(l, 1)),
        }
    }
    Segmentation { regions }
}

/// Resolves possibly overlapping reference intervals to one label per
/// timestep. A timestep covered by several steps takes the step that comes
/// first in the canonical order; uncovered timesteps are background.
pub fn resolve_multilabel(video: &VideoInstance, task: &TaskDefinition) -> Result<FrameLabeling> {
    let t_len = video.len();
    let mut labels = vec![Label::Background; t_len];
    let Some(reference) = &video.reference else {
        return Ok(FrameLabeling { labels });
    };
    for a in reference {
        if a.step >= task.n_steps() {
            return Err(Error::Validation(format!(
                "video {}: annotation references step {} but task {} has {} steps",
                video.id,
                a.step,
                task.id,
                task.n_steps()
            )));
        }
        if !a.interval().fits(t_len) {
            return Err(Error::Validation(format!(
                "video {}: annotation {} out of range for {t_len} timesteps",
                video.id,
                a.interval()
            )));
        }
        for slot in &mut labels[a.start..a.end] {
            // Lower step index = earlier in canonical order; same-step
            // overlaps collapse to the union.
            *slot = match *slot {
                Label::Step(j) if j <= a.step => Label::Step(j),
                _ => Label::Step(a.step),
            };
        }
    }
    Ok(FrameLabeling { labels })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub tasks: Vec<TaskDefinition>,
    pub videos: Vec<VideoInstance>,
}

impl Dataset {
    pub fn new(tasks: Vec<TaskDefinition>, videos: Vec<VideoInstance>) -> Self {
        Dataset { tasks, videos }
    }

    pub fn task(&self, id: &str) -> Option<&TaskDefinition> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn videos_of<'a>(&'a self, task_id: &'a str) -> impl Iterator<Item = &'a VideoInstance> + 'a {
        self.videos.iter().filter(move |v| v.task_id == task_id)
    }

    /// Reference frame labeling of every video that has annotations.
    pub fn reference_frames(&self, video: &VideoInstance) -> Result<Option<FrameLabeling>> {
        if video.reference.is_none() {
            return Ok(None);
        }
        let task = self
            .task(&video.task_id)
            .ok_or_else(|| Error::Validation(format!("unknown task {}", video.task_id)))?;
        resolve_multilabel(video, task).map(Some)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_dataset(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyTask { task: String },
    DuplicateTask { task: String },
    DuplicateStep { task: String, step: String },
    DuplicateVideo { video: String },
    UnknownTask { video: String, task: String },
    EmptyVideo { video: String },
    GroupLayout { video: String, groups: usize, columns: usize },
    UnknownStep { video: String, step: usize, n_steps: usize },
    IntervalOutOfRange { video: String, step: usize, interval: Interval, timesteps: usize },
    ConstraintOutOfRange { video: String, step: usize, interval: Interval, timesteps: usize },
    Dimensionality { task: String, video: String, expected: usize, found: usize },
    GroupMismatch { task: String, video: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            EmptyTask { task } => write!(f, "task {task} has no steps"),
            DuplicateTask { task } => write!(f, "task id {task} declared twice"),
            DuplicateStep { task, step } => write!(f, "task {task}: step name {step:?} repeated"),
            DuplicateVideo { video } => write!(f, "video id {video} declared twice"),
            UnknownTask { video, task } => write!(f, "video {video}: unknown task {task}"),
            EmptyVideo { video } => write!(f, "video {video}: no timesteps"),
            GroupLayout { video, groups, columns } => write!(
                f,
                "video {video}: feature groups cover {groups} columns, features have {columns}"
            ),
            UnknownStep { video, step, n_steps } => write!(
                f,
                "video {video}: step {step} out of range for task with {n_steps} steps"
            ),
            IntervalOutOfRange { video, step, interval, timesteps } => write!(
                f,
                "video {video}: annotation {interval} of step {step} outside [0, {timesteps})"
            ),
            ConstraintOutOfRange { video, step, interval, timesteps } => write!(
                f,
                "video {video}: constraint {interval} of step {step} outside [0, {timesteps})"
            ),
            Dimensionality { task, video, expected, found } => write!(
                f,
                "task {task}: video {video} has {found} feature dims, expected {expected}"
            ),
            GroupMismatch { task, video } => {
                write!(f, "task {task}: video {video} feature group layout differs")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            let lines: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
            Err(Error::Validation(lines.join("; ")))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Lists every invariant violation in the dataset.
pub fn validate_dataset(ds: &Dataset) -> ValidationReport {
    let mut violations = Vec::new();
    let mut task_ids = HashSet::new();
    for task in &ds.tasks {
        if !task_ids.insert(task.id.as_str()) {
            violations.push(Violation::DuplicateTask {
                task: task.id.clone(),
            });
        }
        violations.extend(task.problems());
    }
    let tasks: HashMap<&str, &TaskDefinition> =
        ds.tasks.iter().map(|t| (t.id.as_str(), t)).collect();

    let mut video_ids = HashSet::new();
    // First video seen per task fixes the expected layout.
    let mut layouts: HashMap<&str, (&str, usize, &[FeatureGroup])> = HashMap::new();
    for video in &ds.videos {
        if !video_ids.insert(video.id.as_str()) {
            violations.push(Violation::DuplicateVideo {
                video: video.id.clone(),
            });
        }
        let t_len = video.len();
        if t_len == 0 {
            violations.push(Violation::EmptyVideo {
                video: video.id.clone(),
            });
        }
        let grouped: usize = video.groups.iter().map(|g| g.dim).sum();
        if grouped != video.dim() {
            violations.push(Violation::GroupLayout {
                video: video.id.clone(),
                groups: grouped,
                columns: video.dim(),
            });
        }
        let Some(task) = tasks.get(video.task_id.as_str()) else {
            violations.push(Violation::UnknownTask {
                video: video.id.clone(),
                task: video.task_id.clone(),
            });
            continue;
        };
        match layouts.get(video.task_id.as_str()) {
            None => {
                layouts.insert(&video.task_id, (&video.id, video.dim(), &video.groups));
            }
            Some(&(_, dim, groups)) => {
                if dim != video.dim() {
                    violations.push(Violation::Dimensionality {
                        task: video.task_id.clone(),
                        video: video.id.clone(),
                        expected: dim,
                        found: video.dim(),
                    });
                } else if groups != video.groups.as_slice() {
                    violations.push(Violation::GroupMismatch {
                        task: video.task_id.clone(),
                        video: video.id.clone(),
                    });
                }
            }
        }
        for a in video.reference.iter().flatten() {
            if a.step >= task.n_steps() {
                violations.push(Violation::UnknownStep {
                    video: video.id.clone(),
                    step: a.step,
                    n_steps: task.n_steps(),
                });
            }
            if !a.interval().fits(t_len) {
                violations.push(Violation::IntervalOutOfRange {
                    video: video.id.clone(),
                    step: a.step,
                    interval: a.interval(),
                    timesteps: t_len,
                });
            }
        }
        for (&step, intervals) in video.narration.iter().flatten() {
            if step >= task.n_steps() {
                violations.push(Violation::UnknownStep {
                    video: video.id.clone(),
                    step,
                    n_steps: task.n_steps(),
                });
            }
            for iv in intervals {
                if !iv.fits(t_len) {
                    violations.push(Violation::ConstraintOutOfRange {
                        video: video.id.clone(),
                        step,
                        interval: *iv,
                        timesteps: t_len,
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Distinct step types present in a frame labeling.
pub fn step_types<'a>(frames: impl IntoIterator<Item = &'a Label>) -> BTreeSet<usize> {
    frames.into_iter().filter_map(|l| l.step()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use Label::{Background as Bkg, Step};

    fn task(n: usize) -> TaskDefinition {
        TaskDefinition::new("t", (0..n).map(|i| format!("step{i}")).collect()).unwrap()
    }

    fn video(t_len: usize, f: usize) -> VideoInstance {
        VideoInstance::new("v", "t", Array2::zeros((t_len, f)))
    }

    #[test]
    fn resolves_overlap_to_canonical_first() {
        let v = video(8, 1).with_reference(vec![
            AnnotatedInterval::new(0, 2, 5),
            AnnotatedInterval::new(1, 4, 7),
        ]);
        let frames = resolve_multilabel(&v, &task(2)).unwrap();
        assert_eq!(
            frames.labels,
            vec![Bkg, Bkg, Step(0), Step(0), Step(0), Step(1), Step(1), Bkg]
        );
    }

    #[test]
    fn overlap_order_does_not_matter() {
        let v = video(8, 1).with_reference(vec![
            AnnotatedInterval::new(1, 4, 7),
            AnnotatedInterval::new(0, 2, 5),
        ]);
        let frames = resolve_multilabel(&v, &task(2)).unwrap();
        assert_eq!(frames.labels[4], Step(0));
    }

    #[test]
    fn resolve_edge_cases() {
        let v = video(3, 1).with_reference(vec![]);
        assert_eq!(resolve_multilabel(&v, &task(1)).unwrap().labels, vec![Bkg; 3]);

        let v = video(4, 1).with_reference(vec![AnnotatedInterval::new(0, 0, 4)]);
        assert_eq!(resolve_multilabel(&v, &task(1)).unwrap().labels, vec![Step(0); 4]);

        let v = video(4, 1).with_reference(vec![AnnotatedInterval::new(3, 0, 2)]);
        assert!(matches!(resolve_multilabel(&v, &task(2)), Err(Error::Validation(_))));
    }

    #[test]
    fn same_step_overlap_is_union() {
        let v = video(6, 1).with_reference(vec![
            AnnotatedInterval::new(0, 0, 3),
            AnnotatedInterval::new(0, 2, 5),
        ]);
        let frames = resolve_multilabel(&v, &task(1)).unwrap();
        assert_eq!(frames.labels, vec![Step(0), Step(0), Step(0), Step(0), Step(0), Bkg]);
    }

    #[test]
    fn conversions() {
        let seg = Segmentation::from_pairs(&[(Step(0), 2), (Bkg, 1)]).unwrap();
        assert_eq!(seg.to_frames().labels, vec![Step(0), Step(0), Bkg]);
        let seg = Segmentation::from_pairs(&[(Bkg, 3)]).unwrap();
        assert_eq!(seg.to_frames().labels, vec![Bkg; 3]);

        let frames = FrameLabeling::new(vec![Step(0), Step(0), Bkg, Step(1)]);
        assert_eq!(
            frames.to_segmentation(),
            Segmentation::from_pairs(&[(Step(0), 2), (Bkg, 1), (Step(1), 1)]).unwrap()
        );
        let frames = FrameLabeling::new(vec![Step(0); 3]);
        assert_eq!(
            frames.to_segmentation(),
            Segmentation::from_pairs(&[(Step(0), 3)]).unwrap()
        );
    }

    #[test]
    fn segmentation_rejects_bad_regions() {
        assert!(Segmentation::from_pairs(&[(Bkg, 0)]).is_err());
        assert!(Segmentation::with_length(vec![Region::new(Bkg, 3)], 4).is_err());
        assert!(Segmentation::with_length(vec![Region::new(Bkg, 4)], 4).is_ok());
    }

    #[test]
    fn validation_reports() {
        let ds = Dataset::new(vec![task(2)], vec![video(5, 3)]);
        assert!(validate_dataset(&ds).is_valid());

        let bad = video(5, 3).with_reference(vec![AnnotatedInterval::new(0, 2, 7)]);
        let ds = Dataset::new(vec![task(2)], vec![bad]);
        let report = validate_dataset(&ds);
        assert_eq!(report.violations.len(), 1);
        let msg = report.violations[0].to_string();
        assert!(msg.contains("video v") && msg.contains("[2, 7)"), "{msg}");

        let mut a = VideoInstance::new("a", "t", Array2::zeros((4, 300)));
        let b = VideoInstance::new("b", "t", Array2::zeros((4, 200)));
        a.id = "a".into();
        let ds = Dataset::new(vec![task(1)], vec![a, b]);
        let report = validate_dataset(&ds);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(
            report.violations[0],
            Violation::Dimensionality { expected: 300, found: 200, .. }
        ));

        let orphan = VideoInstance::new("o", "nope", Array2::zeros((2, 1)));
        let ds = Dataset::new(vec![task(1)], vec![orphan]);
        assert!(matches!(
            validate_dataset(&ds).violations[0],
            Violation::UnknownTask { .. }
        ));
    }

    #[test]
    fn task_invariants() {
        assert!(TaskDefinition::new("x", vec![]).is_err());
        assert!(TaskDefinition::new("x", vec!["a".into(), "a".into()]).is_err());
        assert_eq!(task(2).labels(), vec![Step(0), Step(1), Bkg]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn label() -> impl Strategy<Value = Label> {
            prop_oneof![Just(Bkg), (0usize..3).prop_map(Step)]
        }

        proptest! {
            #[test]
            fn frames_round_trip(labels in proptest::collection::vec(label(), 1..40)) {
                let frames = FrameLabeling::new(labels);
                prop_assert_eq!(frames.to_segmentation().to_frames(), frames);
            }

            #[test]
            fn segmentation_round_trip(
                pairs in proptest::collection::vec((label(), 1usize..5), 1..12)
            ) {
                let seg = Segmentation::from_pairs(&pairs).unwrap().coalesce();
                prop_assert_eq!(seg.to_frames().to_segmentation(), seg.clone());
                prop_assert!(seg.regions.windows(2).all(|w| w[0].label != w[1].label));
            }

            #[test]
            fn resolved_labels_are_covered(
                raw in proptest::collection::vec((0usize..3, 0usize..12, 1usize..6), 0..6)
            ) {
                let t_len = 12;
                let reference: Vec<_> = raw
                    .into_iter()
                    .map(|(s, a, len)| AnnotatedInterval::new(s, a, (a + len).min(t_len)))
                    .filter(|a| a.start < a.end)
                    .collect();
                let v = video(t_len, 1).with_reference(reference.clone());
                let frames = resolve_multilabel(&v, &task(3)).unwrap();
                prop_assert_eq!(frames.len(), t_len);
                for (t, l) in frames.labels.iter().enumerate() {
                    let covering: Vec<usize> = reference
                        .iter()
                        .filter(|a| a.interval().contains(t))
                        .map(|a| a.step)
                        .collect();
                    match l {
                        Step(j) => prop_assert_eq!(Some(*j), covering.iter().copied().min()),
                        Bkg => prop_assert!(covering.is_empty()),
                    }
                }
            }
        }
    }
}
