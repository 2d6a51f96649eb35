//! Model files: a header line carrying the format version and a SHA-256 of
//! the JSON payload that follows it.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constraints::OrderedStateSpace;
use crate::data::{Label, TaskDefinition};
use crate::error::{Error, Result};
use crate::features::PcaModel;
use crate::model::params::{DurationConfig, ModelParams, StateSpace};

pub const MODEL_MAGIC: &str = "stepseg-model";
pub const MODEL_VERSION: u32 = 1;

/// `f64` that survives JSON: non-finite values are written as strings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let x = self.0;
        if x.is_finite() {
            s.serialize_f64(x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(Real(x)),
            Repr::Text(t) => match t.as_str() {
                "-inf" => Ok(Real(f64::NEG_INFINITY)),
                "inf" => Ok(Real(f64::INFINITY)),
                "nan" => Ok(Real(f64::NAN)),
                other => Err(de::Error::custom(format!("invalid number {other:?}"))),
            },
        }
    }
}

fn reals(v: &[f64]) -> Vec<Real> {
    v.iter().map(|&x| Real(x)).collect()
}

fn unreal(v: &[Real]) -> Vec<f64> {
    v.iter().map(|r| r.0).collect()
}

/// Serializable form of [`ModelParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub labels: Vec<Label>,
    pub init_log: Vec<Real>,
    pub trans_log: Vec<Vec<Real>>,
    pub lambdas: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
    pub durations: DurationConfig,
    /// Present when the model decodes over the ordered state space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordered: Option<OrderedStateSpace>,
}

impl ParamsRecord {
    pub fn new(params: &ModelParams, ordered: Option<&OrderedStateSpace>) -> Self {
        ParamsRecord {
            labels: params.labels.clone(),
            init_log: reals(&params.init_log),
            trans_log: params.trans_log.rows().into_iter().map(|r| reals(&r.to_vec())).collect(),
            lambdas: params.lambdas.clone(),
            means: params.means.rows().into_iter().map(|r| r.to_vec()).collect(),
            variances: params.variances.clone(),
            durations: params.durations,
            ordered: ordered.cloned(),
        }
    }

    pub fn to_params(&self) -> Result<ModelParams> {
        let n = self.labels.len();
        let dim = self.variances.len();
        let trans: Vec<f64> = self.trans_log.iter().flat_map(|r| unreal(r)).collect();
        let trans_log = Array2::from_shape_vec((n, n), trans)
            .map_err(|_| Error::Validation("transition matrix is not square".into()))?;
        let means = Array2::from_shape_vec((n, dim), self.means.concat())
            .map_err(|_| Error::Validation("means do not match labels x dimensions".into()))?;
        let mut params = ModelParams::new(
            self.labels.clone(),
            unreal(&self.init_log),
            trans_log,
            self.lambdas.clone(),
            means,
            self.variances.clone(),
        )?;
        params.durations = self.durations;
        params.space = match &self.ordered {
            Some(space) => space.to_state_space(&params.labels)?,
            None => StateSpace::unconstrained(n),
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskModel {
    pub task: TaskDefinition,
    pub params: ParamsRecord,
    /// Label of each model slot when the slots were learned without labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<Vec<Label>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub tasks: BTreeMap<String, TaskModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca: Option<PcaModel>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Header line plus payload, as written by [`save_model`].
pub fn encode_model(bundle: &ModelBundle) -> Vec<u8> {
    let payload = serde_json::to_vec_pretty(bundle).expect("model serializes");
    let mut out = format!(
        "{MODEL_MAGIC} v{MODEL_VERSION} sha256={} bytes={}\n",
        sha256_hex(&payload),
        payload.len()
    )
    .into_bytes();
    out.extend_from_slice(&payload);
    out
}

pub fn decode_model(bytes: &[u8], path: &Path) -> Result<ModelBundle> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse(path, "missing model header"))?;
    let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| Error::parse(path, "header is not UTF-8"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != MODEL_MAGIC {
        return Err(Error::parse(path, format!("not a model file header: {header:?}")));
    }
    let version: u32 = fields[1]
        .strip_prefix('v')
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(path, format!("bad version field {:?}", fields[1])))?;
    if version != MODEL_VERSION {
        return Err(Error::Version {
            path: path.display().to_string(),
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let digest = fields[2]
        .strip_prefix("sha256=")
        .ok_or_else(|| Error::parse(path, "missing checksum"))?;
    let length: usize = fields[3]
        .strip_prefix("bytes=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(path, "missing payload length"))?;
    let payload = &bytes[newline + 1..];
    if payload.len() != length || sha256_hex(payload) != digest {
        return Err(Error::Checksum {
            path: path.display().to_string(),
        });
    }
    serde_json::from_slice(payload).map_err(|e| Error::parse(path, e))
}

pub fn save_model(bundle: &ModelBundle, path: &Path) -> Result<()> {
    fs::write(path, encode_model(bundle)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelBundle> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, path)
}
