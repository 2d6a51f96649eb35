//! Raw feature matrices: little-endian floats, row-major, with a JSON
//! sidecar header at `<path>.hdr.json`.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::FeatureGroup;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    #[default]
    F32,
    F64,
}

impl DType {
    pub fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureHeader {
    pub rows: usize,
    pub cols: usize,
    pub groups: Vec<FeatureGroup>,
    #[serde(default)]
    pub dtype: DType,
}

pub fn header_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".hdr.json");
    PathBuf::from(name)
}

/// Writes `x` as `f32`; values not representable in `f32` are rounded.
pub fn write_features(path: &Path, x: &Array2<f64>, groups: &[FeatureGroup]) -> Result<()> {
    write_features_as(path, x, groups, DType::F32)
}

pub fn write_features_as(path: &Path, x: &Array2<f64>, groups: &[FeatureGroup], dtype: DType) -> Result<()> {
    let mut bytes = Vec::with_capacity(x.len() * dtype.width());
    for &v in x.iter() {
        match dtype {
            DType::F32 => bytes.extend_from_slice(&(v as f32).to_le_bytes()),
            DType::F64 => bytes.extend_from_slice(&v.to_le_bytes()),
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let header = FeatureHeader {
        rows: x.nrows(),
        cols: x.ncols(),
        groups: groups.to_vec(),
        dtype,
    };
    let hp = header_path(path);
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(&hp, text).map_err(|e| Error::io(&hp, e))
}

pub fn read_header(path: &Path) -> Result<FeatureHeader> {
    let hp = header_path(path);
    let text = fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(&hp, e))
}

pub fn read_features(path: &Path) -> Result<(Array2<f64>, FeatureHeader)> {
    let header = read_header(path)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let width = header.dtype.width();
    let expected = header.rows * header.cols * width;
    if bytes.len() != expected {
        return Err(Error::parse(
            path,
            format!("{} bytes, header implies {expected}", bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(width)
        .map(|c| match header.dtype {
            DType::F32 => f32::from_le_bytes(c.try_into().expect("width 4")) as f64,
            DType::F64 => f64::from_le_bytes(c.try_into().expect("width 8")),
        })
        .collect();
    let x = Array2::from_shape_vec((header.rows, header.cols), values).expect("length checked");
    Ok((x, header))
}
