//! Feature preprocessing: per-task PCA, diagonal covariance, narration
//! pooling.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{s, Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split, VideoInstance};
use crate::error::{Error, Result};

pub const DEFAULT_COMPONENTS: usize = 100;
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGroupSpec {
    pub name: String,
    pub dim: usize,
    pub components: usize,
}

impl FeatureGroupSpec {
    pub fn new(name: impl Into<String>, dim: usize, components: usize) -> Self {
        FeatureGroupSpec {
            name: name.into(),
            dim,
            components,
        }
    }
}

/// Projection of one feature group of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPca {
    pub name: String,
    /// Column offset of the group in the raw feature matrix.
    pub offset: usize,
    pub mean: Vec<f64>,
    /// `raw dim x components`, orthonormal columns.
    pub projection: Array2<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Components with non-zero variance. Fewer than requested means the
    /// group's data is rank deficient.
    pub effective_components: usize,
}

impl GroupPca {
    pub fn components(&self) -> usize {
        self.projection.ncols()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// Task id to its groups in concatenation order.
    pub tasks: BTreeMap<String, Vec<GroupPca>>,
}

impl PcaModel {
    pub fn output_dim(&self, task: &str) -> Option<usize> {
        self.tasks.get(task).map(|g| g.iter().map(GroupPca::components).sum())
    }
}

/// Fits one PCA per task and feature group on every frame of the task's
/// training videos (those not tagged `test`). Groups are laid out in
/// `specs` order.
pub fn pca_fit(ds: &Dataset, specs: &[FeatureGroupSpec]) -> Result<PcaModel> {
    let mut model = PcaModel::default();
    for task in &ds.tasks {
        let videos: Vec<&VideoInstance> = ds.videos_of(&task.id).filter(|v| v.split != Some(Split::Test)).collect();
        if videos.is_empty() {
            continue;
        }
        model.tasks.insert(task.id.clone(), pca_fit_task(&task.id, &videos, specs)?);
    }
    Ok(model)
}

/// PCA per feature group over the frames of `videos`.
pub fn pca_fit_task(task: &str, videos: &[&VideoInstance], specs: &[FeatureGroupSpec]) -> Result<Vec<GroupPca>> {
    let raw_dim: usize = specs.iter().map(|s| s.dim).sum();
    for spec in specs {
        if spec.components == 0 || spec.components > spec.dim {
            return Err(Error::Config(format!(
                "group {}: {} components for dimension {}",
                spec.name, spec.components, spec.dim
            )));
        }
    }
    if let Some(v) = videos.iter().find(|v| v.dim() != raw_dim) {
        return Err(Error::DimensionMismatch {
            expected: raw_dim,
            found: v.dim(),
        });
    }
    let frames: usize = videos.iter().map(|v| v.len()).sum();
    let mut groups = Vec::with_capacity(specs.len());
    let mut offset = 0;
    for spec in specs {
        if frames < spec.components {
            return Err(Error::InsufficientFrames {
                task: task.to_string(),
                group: spec.name.clone(),
                frames,
                components: spec.components,
            });
        }
        let blocks: Vec<ArrayView2<f64>> = videos
            .iter()
            .map(|v| v.features.slice(s![.., offset..offset + spec.dim]))
            .collect();
        let mut g = fit_group(&blocks, spec.components)?;
        g.name = spec.name.clone();
        g.offset = offset;
        groups.push(g);
        offset += spec.dim;
    }
    Ok(groups)
}

/// PCA of the rows of `blocks`.
pub fn fit_group(blocks: &[ArrayView2<f64>], components: usize) -> Result<GroupPca> {
    let dim = blocks.first().map_or(0, |b| b.ncols());
    let frames: usize = blocks.iter().map(|b| b.nrows()).sum();
    if frames == 0 || dim == 0 {
        return Err(Error::Validation("no data to fit".into()));
    }
    let mut mean = Array1::<f64>::zeros(dim);
    for b in blocks {
        mean += &b.sum_axis(ndarray::Axis(0));
    }
    mean /= frames as f64;

    let mut cov = Array2::<f64>::zeros((dim, dim));
    for b in blocks {
        let centered = b - &mean;
        cov += &centered.t().dot(&centered);
    }
    cov /= frames as f64;

    let eig = SymmetricEigen::new(DMatrix::from_fn(dim, dim, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let tol = 1e-12 * total.max(f64::MIN_POSITIVE);
    let mut projection = Array2::<f64>::zeros((dim, components));
    let mut ratios = Vec::with_capacity(components);
    let mut effective = 0;
    for (c, &k) in order.iter().take(components).enumerate() {
        let col = eig.eigenvectors.column(k);
        // Largest-magnitude entry made positive.
        let pivot = (0..dim)
            .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()).then(b.cmp(&a)))
            .expect("dim > 0");
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..dim {
            projection[[i, c]] = sign * col[i];
        }
        let value = eig.eigenvalues[k].max(0.0);
        if value > tol {
            effective += 1;
        }
        ratios.push(if total > 0.0 { value / total } else { 0.0 });
    }
    Ok(GroupPca {
        name: String::new(),
        offset: 0,
        mean: mean.to_vec(),
        projection,
        explained_variance_ratio: ratios,
        effective_components: effective,
    })
}

/// Centers and projects each group, then concatenates the blocks.
pub fn pca_transform(model: &PcaModel, video: &VideoInstance) -> Result<Array2<f64>> {
    let groups = model
        .tasks
        .get(&video.task_id)
        .ok_or_else(|| Error::MissingModel(format!("no PCA for task {}", video.task_id)))?;
    transform_with(groups, video.features.view())
}

pub fn transform_with(groups: &[GroupPca], x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let width: usize = groups.iter().map(GroupPca::components).sum();
    let mut out = Array2::zeros((x.nrows(), width));
    let mut col = 0;
    for g in groups {
        let dim = g.mean.len();
        if g.offset + dim > x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: g.offset + dim,
                found: x.ncols(),
            });
        }
        let mean = Array1::from(g.mean.clone());
        let centered = &x.slice(s![.., g.offset..g.offset + dim]) - &mean;
        let k = g.components();
        out.slice_mut(s![.., col..col + k]).assign(&centered.dot(&g.projection));
        col += k;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagCovariance {
    pub variances: Vec<f64>,
}

/// Population variance of each column over all rows of `blocks`, floored at
/// `floor`.
pub fn empirical_diag_cov(blocks: &[ArrayView2<f64>], floor: f64) -> Result<DiagCovariance> {
    let frames: usize = blocks.iter().map(|b| b.nrows()).sum();
    if frames < 2 {
        return Err(Error::Validation(format!("{frames} frames, need at least 2 for a covariance")));
    }
    let dim = blocks[0].ncols();
    if let Some(b) = blocks.iter().find(|b| b.ncols() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: b.ncols(),
        });
    }
    let n = frames as f64;
    let mut mean = vec![0.0; dim];
    for b in blocks {
        for row in b.rows() {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for b in blocks {
        for row in b.rows() {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
    }
    Ok(DiagCovariance {
        variances: var.into_iter().map(|v| (v / n).max(floor)).collect(),
    })
}

/// Symmetric Hanning taper of odd length `window`, e.g. `[0, .5, 1, .5, 0]`.
pub fn hanning(window: usize) -> Vec<f64> {
    if window <= 1 {
        return vec![1.0; window];
    }
    (0..window)
        .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (window - 1) as f64).cos())
        .collect()
}

/// Pools timed word embeddings into one row per timestep.
///
/// Each word is placed at its nearest whole second `c` and adds
/// `w[o + h] * v` to row `c + o` for `|o| <= h`, where `w` is the Hanning
/// taper of length `window = 2h + 1`. With `normalize`, every row is divided
/// by its total weight.
pub fn narration_pool(
    words: &[(f64, Vec<f64>)],
    t_len: usize,
    window: usize,
    normalize: bool,
) -> Result<Array2<f64>> {
    if window % 2 == 0 {
        return Err(Error::Config(format!("window {window} must be odd")));
    }
    let dim = words.first().map_or(0, |(_, v)| v.len());
    if let Some((_, v)) = words.iter().find(|(_, v)| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: v.len(),
        });
    }
    let taper = hanning(window);
    let half = (window / 2) as i64;
    let mut out = Array2::zeros((t_len, dim));
    let mut weight = vec![0.0; t_len];
    for (time, v) in words {
        let centre = time.round() as i64;
        for o in -half..=half {
            let t = centre + o;
            if t < 0 || t >= t_len as i64 {
                continue;
            }
            let w = taper[(o + half) as usize];
            weight[t as usize] += w;
            for (dst, x) in out.row_mut(t as usize).iter_mut().zip(v) {
                *dst += w * x;
            }
        }
    }
    if normalize {
        for (t, &w) in weight.iter().enumerate() {
            if w > 0.0 {
                out.row_mut(t).mapv_inplace(|x| x / w);
            }
        }
    }
    Ok(out)
}
