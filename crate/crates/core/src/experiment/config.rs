//! Experiment configuration, read from a TOML file.
//!
//! ```toml
//! seed = 42
//! out = "runs/demo"
//! repetitions = 10
//!
//! [data]
//! horizon = "10min"        # or "1h", or a step count
//! block = 144
//! # csv = "wind.csv"       # exactly one of csv / [data.synth]
//! # column = "speed"
//!
//! [data.synth]
//! n = 20000
//! step_minutes = 10
//!
//! [model]
//! hidden = [125, 100]
//! learning_rate = 0.001
//! batch_size = 512
//! optimizer = "adam"
//! epochs = 100
//!
//! [fitness]
//! omega = 0.001
//! rho = 600.0
//! epochs = 100
//!
//! [cmaes]
//! budget = 1000
//! population = 12
//! sigma = 0.25
//!
//! [grid]
//! learning_rates = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1]
//! batch_sizes = [8, 32, 128, 512, 1024]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::data::SynthParams;
use crate::derive_seed;
use crate::lstm::OptimizerKind;
use crate::tuner::{FitnessConfig, GridSpec, TuneSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Horizon {
    Steps(usize),
    Named(NamedHorizon),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamedHorizon {
    #[serde(rename = "10min")]
    TenMinutes,
    #[serde(rename = "1h")]
    OneHour,
}

impl Horizon {
    pub fn parse(s: &str) -> Result<Self, ExperimentError> {
        match s.trim() {
            "10min" => Ok(Self::Named(NamedHorizon::TenMinutes)),
            "1h" => Ok(Self::Named(NamedHorizon::OneHour)),
            other => other
                .parse::<usize>()
                .ok()
                .filter(|h| *h > 0)
                .map(Self::Steps)
                .ok_or_else(|| {
                    ExperimentError::Config(format!(
                        "horizon `{other}`: expected 10min, 1h or a step count"
                    ))
                }),
        }
    }

    /// Steps ahead on 10-minute data.
    pub fn steps(self) -> usize {
        match self {
            Self::Steps(h) => h,
            Self::Named(NamedHorizon::TenMinutes) => 1,
            Self::Named(NamedHorizon::OneHour) => 6,
        }
    }

    /// Default input window: one hour of history for the 10-minute horizon,
    /// two hours otherwise.
    pub fn default_lag(self) -> usize {
        if self.steps() == 1 {
            6
        } else {
            12
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub step_minutes: u32,
    /// Defaults to a seed derived from the top-level seed.
    pub seed: Option<u64>,
    pub shape: f64,
    pub scale: f64,
    pub ar: f64,
    pub diurnal_amplitude: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let p = SynthParams::default();
        Self {
            n: 20_000,
            step_minutes: 10,
            seed: None,
            shape: p.shape,
            scale: p.scale,
            ar: p.ar,
            diurnal_amplitude: p.diurnal_amplitude,
        }
    }
}

impl SynthConfig {
    pub fn params(&self) -> SynthParams {
        SynthParams {
            shape: self.shape,
            scale: self.scale,
            ar: self.ar,
            diurnal_amplitude: self.diurnal_amplitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub csv: Option<PathBuf>,
    pub column: String,
    pub synth: Option<SynthConfig>,
    pub horizon: Horizon,
    /// Defaults to the horizon's lag.
    pub lag: Option<usize>,
    pub block: usize,
    /// Defaults to a seed derived from the top-level seed.
    pub split_seed: Option<u64>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            csv: None,
            column: "speed".into(),
            synth: None,
            horizon: Horizon::Named(NamedHorizon::TenMinutes),
            lag: None,
            block: 144,
            split_seed: None,
        }
    }
}

/// Fixed hyperparameters for `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub epochs: usize,
    pub clip_norm: Option<f64>,
    /// Train on a seeded subset of at most this many windows.
    pub max_train_samples: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![125, 100],
            learning_rate: 1e-3,
            batch_size: 512,
            optimizer: OptimizerKind::Adam,
            epochs: 100,
            clip_norm: Some(1.0),
            max_train_samples: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub repetitions: usize,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub fitness: FitnessConfig,
    pub cmaes: TuneSettings,
    pub grid: GridSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("windcast-out"),
            repetitions: 10,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            fitness: FitnessConfig::default(),
            cmaes: TuneSettings::default(),
            grid: GridSpec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sets every unset seed from the top-level one. Derived seeds keep 63
    /// bits so the resolved config still fits TOML integers.
    pub fn resolve_seeds(&mut self) {
        let sub = |stream| derive_seed(self.seed, stream) >> 1;
        if self.data.split_seed.is_none() {
            self.data.split_seed = Some(sub(1));
        }
        if let Some(s) = self.data.synth.as_mut() {
            if s.seed.is_none() {
                s.seed = Some(sub(2));
            }
        }
        self.cmaes.seed = sub(3);
        self.grid.seed = sub(4);
    }

    pub fn lag(&self) -> usize {
        self.data
            .lag
            .unwrap_or_else(|| self.data.horizon.default_lag())
    }

    pub fn horizon(&self) -> usize {
        self.data.horizon.steps()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        match (&self.data.csv, &self.data.synth) {
            (Some(_), Some(_)) => return bad("set either data.csv or [data.synth], not both"),
            (None, None) => return bad("no data source: set data.csv or [data.synth]"),
            _ => {}
        }
        if self.seed > i64::MAX as u64 {
            return bad("seed must fit in 63 bits");
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.lag() == 0 || self.horizon() == 0 {
            return bad("lag and horizon must be positive");
        }
        if self.model.hidden.is_empty() || self.model.hidden.contains(&0) {
            return bad("model.hidden needs at least one positive layer size");
        }
        if self.model.epochs == 0 || self.model.batch_size == 0 {
            return bad("model epochs and batch size must be positive");
        }
        if !(self.model.learning_rate > 0.0) {
            return bad("model.learning_rate must be positive");
        }
        self.fitness
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }
}
