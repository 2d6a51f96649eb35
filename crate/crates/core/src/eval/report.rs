use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::FrameLabeling;
use crate::error::Result;
use crate::eval::metrics::{
    frame_matches, num_step_segments, sequence_similarity, step_frame_matches, step_recall_counts,
};

/// Raw per-video counts from which every metric is aggregated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEval {
    pub video_id: String,
    pub task_id: String,
    pub frames: usize,
    pub correct: usize,
    pub step_frames: usize,
    pub step_correct: usize,
    pub predicted_background: usize,
    pub recovered: usize,
    pub present: usize,
    pub similarity: f64,
    pub step_segments: usize,
}

pub fn evaluate_video(
    video_id: &str,
    task_id: &str,
    pred: &FrameLabeling,
    reference: &FrameLabeling,
) -> Result<VideoEval> {
    let (correct, frames) = frame_matches(pred, reference)?;
    let (step_correct, step_frames) = step_frame_matches(pred, reference)?;
    let (recovered, present) = step_recall_counts(pred, reference)?;
    let pred_seg = pred.to_segmentation();
    let ref_seg = reference.to_segmentation();
    Ok(VideoEval {
        video_id: video_id.to_string(),
        task_id: task_id.to_string(),
        frames,
        correct,
        step_frames,
        step_correct,
        predicted_background: pred.labels.iter().filter(|l| l.is_background()).count(),
        recovered,
        present,
        similarity: sequence_similarity(&pred_seg.labels(), &ref_seg.labels()),
        step_segments: num_step_segments(&pred_seg),
    })
}

/// All values in percent except `step_segments`. A metric is `None` when
/// its denominator is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub all_frame_accuracy: Option<f64>,
    pub step_frame_accuracy: Option<f64>,
    pub step_recall: Option<f64>,
    pub sequence_similarity: Option<f64>,
    pub background_pct: Option<f64>,
    pub step_segments: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let kept: Vec<f64> = values.flatten().collect();
    (!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64)
}

impl Metrics {
    /// Frame-level metrics and recall pool counts over the videos; sequence
    /// similarity and segment counts are per-video means.
    pub fn of_videos(videos: &[&VideoEval]) -> Metrics {
        let sum = |f: fn(&VideoEval) -> usize| videos.iter().map(|v| f(v)).sum::<usize>();
        let frames = sum(|v| v.frames);
        Metrics {
            all_frame_accuracy: ratio(sum(|v| v.correct), frames),
            step_frame_accuracy: ratio(sum(|v| v.step_correct), sum(|v| v.step_frames)),
            step_recall: ratio(sum(|v| v.recovered), sum(|v| v.present)),
            sequence_similarity: mean(videos.iter().map(|v| Some(v.similarity))),
            background_pct: ratio(sum(|v| v.predicted_background), frames),
            step_segments: mean(videos.iter().map(|v| Some(v.step_segments as f64))),
        }
    }

    /// Unweighted mean over rows, skipping missing values.
    pub fn average<'a>(rows: impl Iterator<Item = &'a Metrics> + Clone) -> Metrics {
        Metrics {
            all_frame_accuracy: mean(rows.clone().map(|m| m.all_frame_accuracy)),
            step_frame_accuracy: mean(rows.clone().map(|m| m.step_frame_accuracy)),
            step_recall: mean(rows.clone().map(|m| m.step_recall)),
            sequence_similarity: mean(rows.clone().map(|m| m.sequence_similarity)),
            background_pct: mean(rows.clone().map(|m| m.background_pct)),
            step_segments: mean(rows.map(|m| m.step_segments)),
        }
    }

    pub fn columns(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("all_frame_accuracy", self.all_frame_accuracy),
            ("step_frame_accuracy", self.step_frame_accuracy),
            ("step_recall", self.step_recall),
            ("sequence_similarity", self.sequence_similarity),
            ("background_pct", self.background_pct),
            ("step_segments", self.step_segments),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task_id: String,
    pub videos: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tasks: Vec<TaskRow>,
    pub average: Metrics,
    /// Tasks named in `task_ids` that had no evaluated videos.
    pub excluded_tasks: Vec<String>,
}

/// Groups videos by task, computes per-task metrics, then averages the
/// tasks without weighting.
pub fn aggregate(videos: &[VideoEval], task_ids: &[String]) -> EvalReport {
    let mut by_task: BTreeMap<&str, Vec<&VideoEval>> = BTreeMap::new();
    for v in videos {
        by_task.entry(v.task_id.as_str()).or_default().push(v);
    }
    let tasks: Vec<TaskRow> = by_task
        .iter()
        .map(|(task, vs)| TaskRow {
            task_id: task.to_string(),
            videos: vs.len(),
            metrics: Metrics::of_videos(vs),
        })
        .collect();
    let excluded_tasks = task_ids
        .iter()
        .filter(|t| !by_task.contains_key(t.as_str()))
        .cloned()
        .collect();
    EvalReport {
        average: Metrics::average(tasks.iter().map(|r| &r.metrics)),
        tasks,
        excluded_tasks,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.1}"))
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<20} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "task", "videos", "all_acc", "step_acc", "recall", "seq_sim", "bkg_pct", "num_seg"
        )?;
        let mut line = |name: &str, videos: String, m: &Metrics| {
            writeln!(
                f,
                "{:<20} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
                name,
                videos,
                cell(m.all_frame_accuracy),
                cell(m.step_frame_accuracy),
                cell(m.step_recall),
                cell(m.sequence_similarity),
                cell(m.background_pct),
                cell(m.step_segments)
            )
        };
        for row in &self.tasks {
            line(&row.task_id, row.videos.to_string(), &row.metrics)?;
        }
        let total: usize = self.tasks.iter().map(|r| r.videos).sum();
        line("average", total.to_string(), &self.average)
    }
}
