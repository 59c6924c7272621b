//! Plain-text model checkpoints.
//!
//! One `key = value` pair per line; `#` starts a comment line. Arrays are
//! written as whitespace-separated numbers in row-major order using Rust's
//! shortest round-trip float formatting, so a reload is bit-exact.
//!
//! ```text
//! format = windcast-lstm-v1
//! peephole = diagonal
//! input_size = 1
//! hidden = 125 100
//! lag = 6
//! horizon = 1
//! norm.shift = 0.03
//! norm.scale = 24.9
//! seed = 42
//! layer.0.w_x = ...        # 4U x D, gate rows i, f, c, o
//! layer.0.w_m = ...        # 4U x U, same gate order
//! layer.0.w_peep = ...     # 3U: input, forget, output peepholes
//! layer.0.bias = ...       # 4U
//! head.weights = ...       # U of the last layer
//! head.bias = ...
//! meta.<name> = <text>     # free-form provenance
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::network::{LstmLayerParams, LstmNetwork, OutputHead};
use crate::data::NormalizationParams;

pub const FORMAT_TAG: &str = "windcast-lstm-v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("bad value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("unsupported checkpoint: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: LstmNetwork,
    pub norm: NormalizationParams,
    pub lag: usize,
    pub horizon: usize,
    pub seed: u64,
    pub meta: BTreeMap<String, String>,
}

fn join(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 20);
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            s.push(' ');
        }
        write!(s, "{v:?}").expect("string write");
    }
    s
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("format", FORMAT_TAG.into());
        kv("peephole", "diagonal".into());
        kv("input_size", self.network.input_size().to_string());
        let hidden: Vec<String> = self
            .network
            .hidden_sizes()
            .iter()
            .map(|h| h.to_string())
            .collect();
        kv("hidden", hidden.join(" "));
        kv("lag", self.lag.to_string());
        kv("horizon", self.horizon.to_string());
        kv("norm.shift", format!("{:?}", self.norm.shift));
        kv("norm.scale", format!("{:?}", self.norm.scale));
        kv("seed", self.seed.to_string());
        for (i, l) in self.network.layers.iter().enumerate() {
            kv(&format!("layer.{i}.w_x"), join(&l.w_x));
            kv(&format!("layer.{i}.w_m"), join(&l.w_m));
            kv(&format!("layer.{i}.w_peep"), join(&l.w_peep));
            kv(&format!("layer.{i}.bias"), join(&l.bias));
        }
        kv("head.weights", join(&self.network.head.weights));
        kv("head.bias", format!("{:?}", self.network.head.bias));
        for (k, v) in &self.meta {
            kv(&format!("meta.{k}"), v.replace('\n', " "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CheckpointError> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| CheckpointError::Parse {
                line: n + 1,
                reason: "expected `key = value`".into(),
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            map.get(k)
                .ok_or_else(|| CheckpointError::MissingKey(k.to_string()))
        };
        let bad = |k: &str, reason: String| CheckpointError::BadValue {
            key: k.to_string(),
            reason,
        };
        let scalar = |k: &str| -> Result<f64, CheckpointError> {
            get(k)?.parse::<f64>().map_err(|e| bad(k, e.to_string()))
        };
        let count = |k: &str| -> Result<usize, CheckpointError> {
            get(k)?.parse::<usize>().map_err(|e| bad(k, e.to_string()))
        };
        let array = |k: &str, len: usize| -> Result<Vec<f64>, CheckpointError> {
            let v: Vec<f64> = get(k)?
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| bad(k, e.to_string()))?;
            if v.len() != len {
                return Err(bad(k, format!("expected {len} values, found {}", v.len())));
            }
            Ok(v)
        };

        if get("format")? != FORMAT_TAG {
            return Err(CheckpointError::Unsupported(format!(
                "format `{}`",
                get("format")?
            )));
        }
        if get("peephole")? != "diagonal" {
            return Err(CheckpointError::Unsupported(format!(
                "peephole `{}`",
                get("peephole")?
            )));
        }
        let input_size = count("input_size")?;
        let hidden: Vec<usize> = get("hidden")?
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad("hidden", e.to_string()))?;
        if hidden.is_empty() {
            return Err(bad("hidden", "no layers".into()));
        }
        let mut layers = Vec::with_capacity(hidden.len());
        let mut d = input_size;
        for (i, &u) in hidden.iter().enumerate() {
            layers.push(LstmLayerParams {
                input_size: d,
                hidden: u,
                w_x: array(&format!("layer.{i}.w_x"), 4 * u * d)?,
                w_m: array(&format!("layer.{i}.w_m"), 4 * u * u)?,
                w_peep: array(&format!("layer.{i}.w_peep"), 3 * u)?,
                bias: array(&format!("layer.{i}.bias"), 4 * u)?,
            });
            d = u;
        }
        let network = LstmNetwork {
            layers,
            head: OutputHead {
                weights: array("head.weights", d)?,
                bias: scalar("head.bias")?,
            },
        };
        let meta = map
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("meta.").map(|k| (k.to_string(), v.clone())))
            .collect();
        Ok(Self {
            network,
            norm: NormalizationParams {
                shift: scalar("norm.shift")?,
                scale: scalar("norm.scale")?,
            },
            lag: count("lag")?,
            horizon: count("horizon")?,
            seed: get("seed")?
                .parse()
                .map_err(|e: std::num::ParseIntError| bad("seed", e.to_string()))?,
            meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
