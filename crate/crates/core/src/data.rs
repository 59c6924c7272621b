//! Wind-speed series ingestion, scaling, windowing, splitting and synthesis.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;
use thiserror::Error;

/// Timestamp layout used when writing CSV files.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("non-uniform timestep at line {line}")]
    NonUniformTimestep { line: u64 },
    #[error("series is constant; cannot min-max normalize")]
    ConstantSeries,
    #[error("series of length {len} too short for lag {lag} and horizon {horizon}")]
    SeriesTooShort {
        len: usize,
        lag: usize,
        horizon: usize,
    },
    #[error("{n} samples is too few for block size {block} (need at least {need})")]
    TooFewSamples { n: usize, block: usize, need: usize },
    #[error("bad k-fold request: k={k}, {n} indices")]
    BadK { k: usize, n: usize },
    #[error("bad synthetic-series parameters: {0}")]
    BadParams(String),
    #[error("empty sample set")]
    EmptySet,
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Uniformly sampled wind speeds in m/s.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    start: NaiveDateTime,
    step_seconds: i64,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(start: NaiveDateTime, step_seconds: i64, values: Vec<f64>) -> Result<Self> {
        if step_seconds <= 0 {
            return Err(DataError::BadParams("step must be positive".into()));
        }
        if values.len() < 2 {
            return Err(DataError::BadParams(format!(
                "series needs at least 2 values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(DataError::BadParams(format!(
                "value {} at index {i} is not a finite non-negative speed",
                values[i]
            )));
        }
        Ok(Self {
            start,
            step_seconds,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn step_seconds(&self) -> i64 {
        self.step_seconds
    }

    pub fn timestamp(&self, i: usize) -> NaiveDateTime {
        self.start + chrono::Duration::seconds(self.step_seconds * i as i64)
    }

    /// Writes the series as `timestamp,speed` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "timestamp,speed")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.timestamp(i).format(TIMESTAMP_FORMAT), v)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let file = io::BufWriter::new(File::create(path)?);
        self.write_csv(file)
    }
}

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.naive_utc());
    }
    [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ]
    .iter()
    .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
}

/// Reads a header-led CSV with a `timestamp` column and the named speed column.
pub fn load_csv(path: impl AsRef<Path>, column: &str) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(DataError::FileNotFound(path.display().to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    read_csv(file, column)
}

pub fn read_csv<R: io::Read>(reader: R, column: &str) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let ts_col = find("timestamp")?;
    let speed_col = find(column)?;

    let mut stamps: Vec<NaiveDateTime> = Vec::new();
    let mut values = Vec::new();
    let mut step: Option<i64> = None;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |reason: String| DataError::MalformedRow { line, reason };
        let ts_raw = record.get(ts_col).unwrap_or("");
        let ts = parse_timestamp(ts_raw)
            .ok_or_else(|| malformed(format!("bad timestamp `{ts_raw}`")))?;
        let v_raw = record.get(speed_col).unwrap_or("").trim();
        let v: f64 = v_raw
            .parse()
            .map_err(|_| malformed(format!("bad speed `{v_raw}`")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(malformed(format!(
                "speed {v} is not a finite non-negative number"
            )));
        }
        if let Some(prev) = stamps.last() {
            let delta = (ts - *prev).num_seconds();
            match step {
                None if delta > 0 => step = Some(delta),
                Some(s) if s == delta => {}
                _ => return Err(DataError::NonUniformTimestep { line }),
            }
        }
        stamps.push(ts);
        values.push(v);
    }
    if values.len() < 2 {
        return Err(DataError::SeriesTooShort {
            len: values.len(),
            lag: 1,
            horizon: 1,
        });
    }
    TimeSeries::new(stamps[0], step.unwrap_or(1), values)
}

/// Min-max scaling parameters: `normalized = (x - shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormalizationParams {
    pub shift: f64,
    pub scale: f64,
}

impl NormalizationParams {
    pub const IDENTITY: Self = Self {
        shift: 0.0,
        scale: 1.0,
    };

    pub fn fit(values: &[f64]) -> Result<Self> {
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if values.is_empty() || !(hi > lo) {
            return Err(DataError::ConstantSeries);
        }
        Ok(Self {
            shift: lo,
            scale: hi - lo,
        })
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.shift) / self.scale
    }

    pub fn denormalize(&self, x: f64) -> f64 {
        x * self.scale + self.shift
    }
}

/// Min-max normalizes a whole series into `[0, 1]`.
pub fn normalize(series: &TimeSeries) -> Result<(Vec<f64>, NormalizationParams)> {
    let params = NormalizationParams::fit(series.values())?;
    Ok((
        series
            .values()
            .iter()
            .map(|&v| params.normalize(v))
            .collect(),
        params,
    ))
}

/// Lagged windows paired with H-step-ahead targets.
///
/// `target_index[i]` is the source-series index of target `i`, kept so that
/// predictions can be matched back to timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedSet {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub target_index: Vec<usize>,
    pub lag: usize,
    pub horizon: usize,
    pub norm: NormalizationParams,
}

impl SupervisedSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            target_index: indices.iter().map(|&i| self.target_index[i]).collect(),
            lag: self.lag,
            horizon: self.horizon,
            norm: self.norm,
        }
    }

    /// Re-expresses the set under new normalization parameters.
    pub fn renormalized(&self, norm: NormalizationParams) -> Self {
        let conv = |v: f64| norm.normalize(self.norm.denormalize(v));
        Self {
            inputs: self
                .inputs
                .iter()
                .map(|w| w.iter().map(|&v| conv(v)).collect())
                .collect(),
            targets: self.targets.iter().map(|&v| conv(v)).collect(),
            target_index: self.target_index.clone(),
            lag: self.lag,
            horizon: self.horizon,
            norm,
        }
    }

    /// Fits min-max parameters to every value this set touches.
    pub fn fit_normalization(&self) -> Result<NormalizationParams> {
        let raw: Vec<f64> = self
            .inputs
            .iter()
            .flatten()
            .chain(self.targets.iter())
            .map(|&v| self.norm.denormalize(v))
            .collect();
        NormalizationParams::fit(&raw)
    }

    /// Targets in physical units.
    pub fn targets_denormalized(&self) -> Vec<f64> {
        self.targets
            .iter()
            .map(|&t| self.norm.denormalize(t))
            .collect()
    }
}

/// Builds `N - L - H + 1` samples; sample `i` reads `values[i..i+L]` and
/// targets `values[i+L+H-1]`. Values are kept in physical units.
pub fn make_windows(series: &TimeSeries, lag: usize, horizon: usize) -> Result<SupervisedSet> {
    make_windows_from(series.values(), lag, horizon)
}

pub fn make_windows_from(values: &[f64], lag: usize, horizon: usize) -> Result<SupervisedSet> {
    let n = values.len();
    if lag == 0 || horizon == 0 || n < lag + horizon {
        return Err(DataError::SeriesTooShort {
            len: n,
            lag,
            horizon,
        });
    }
    let count = n - lag - horizon + 1;
    let inputs = (0..count).map(|i| values[i..i + lag].to_vec()).collect();
    let target_index: Vec<usize> = (0..count).map(|i| i + lag + horizon - 1).collect();
    let targets = target_index.iter().map(|&j| values[j]).collect();
    Ok(SupervisedSet {
        inputs,
        targets,
        target_index,
        lag,
        horizon,
        norm: NormalizationParams::IDENTITY,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Assigns contiguous blocks of sample indices to train/validation/test.
///
/// Train receives `ceil(0.8 n)` indices; the remainder is halved between
/// validation and test. Blocks are visited in a seeded random order and
/// fill train first, then validation, then test. The block that crosses a
/// partition boundary is cut there, so every partition stays a union of
/// contiguous runs.
pub fn block_split(n: usize, block: usize, seed: u64) -> Result<SplitIndices> {
    let need = 3 * block.max(1);
    if block == 0 || n < need {
        return Err(DataError::TooFewSamples { n, block, need });
    }
    let n_train = (n * 4).div_ceil(5);
    let rest = n - n_train;
    let n_val = rest.div_ceil(2);

    let mut blocks: Vec<(usize, usize)> = (0..n)
        .step_by(block)
        .map(|s| (s, (s + block).min(n)))
        .collect();
    blocks.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let order: Vec<usize> = blocks.into_iter().flat_map(|(s, e)| s..e).collect();
    let mut train = order[..n_train].to_vec();
    let mut validation = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices {
        train,
        validation,
        test,
    })
}

/// Splits `indices` into `k` (fit, holdout) pairs after a seeded shuffle.
pub fn kfold_splits(
    indices: &[usize],
    k: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let n = indices.len();
    if k < 2 || n < k {
        return Err(DataError::BadK { k, n });
    }
    let mut shuffled = indices.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let holdout: BTreeSet<usize> = shuffled[start..start + size].iter().copied().collect();
        let fit = indices
            .iter()
            .copied()
            .filter(|i| !holdout.contains(i))
            .collect();
        folds.push((fit, holdout.into_iter().collect()));
        start += size;
    }
    Ok(folds)
}

/// Parameters of the synthetic wind generator.
///
/// A latent Gaussian AR(1) process is mapped through the normal CDF and the
/// inverse Weibull CDF, so the marginal distribution is exactly
/// Weibull(shape, scale) before the diurnal modulation. The diurnal term
/// multiplies by `1 + amplitude * sin(2 pi * time_of_day)`, which leaves the
/// long-run mean unchanged.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthParams {
    pub shape: f64,
    pub scale: f64,
    pub ar: f64,
    pub diurnal_amplitude: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            shape: 2.0,
            scale: 9.6,
            ar: 0.7,
            diurnal_amplitude: 0.1,
        }
    }
}

impl SynthParams {
    /// `scale * Gamma(1 + 1/shape)`.
    pub fn weibull_mean(&self) -> f64 {
        self.scale * statrs::function::gamma::gamma(1.0 + 1.0 / self.shape)
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Generates `n` synthetic wind speeds at `step_minutes` spacing.
pub fn synth_wind(
    n: usize,
    step_minutes: u32,
    seed: u64,
    params: SynthParams,
) -> Result<TimeSeries> {
    let SynthParams {
        shape,
        scale,
        ar,
        diurnal_amplitude: amp,
    } = params;
    if n < 2 {
        return Err(DataError::BadParams(format!(
            "n must be at least 2, got {n}"
        )));
    }
    if step_minutes == 0 {
        return Err(DataError::BadParams(
            "step must be at least one minute".into(),
        ));
    }
    if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
        return Err(DataError::BadParams(
            "Weibull shape and scale must be positive".into(),
        ));
    }
    if !(0.0..=0.999).contains(&ar) {
        return Err(DataError::BadParams(format!(
            "AR coefficient {ar} outside [0, 0.999]"
        )));
    }
    if !(0.0..1.0).contains(&amp) {
        return Err(DataError::BadParams(format!(
            "diurnal amplitude {amp} outside [0, 1)"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innovation = (1.0 - ar * ar).sqrt();
    let day_steps = 1440.0 / step_minutes as f64;
    let mut z: f64 = rng.sample(StandardNormal);
    let mut values = Vec::with_capacity(n);
    for t in 0..n {
        if t > 0 {
            let e: f64 = rng.sample(StandardNormal);
            z = ar * z + innovation * e;
        }
        // Upper tail of the CDF keeps precision for large z.
        let survival = std_normal_cdf(-z).clamp(f64::MIN_POSITIVE, 1.0);
        let w = scale * (-survival.ln()).powf(1.0 / shape);
        let phase = 2.0 * std::f64::consts::PI * (t as f64 / day_steps);
        values.push((w * (1.0 + amp * phase.sin())).max(0.0));
    }
    let start = NaiveDateTime::parse_from_str("2018-07-01T00:00:00", TIMESTAMP_FORMAT)
        .expect("valid literal");
    TimeSeries::new(start, step_minutes as i64 * 60, values)
}

/// Naive forecast: repeat the last value of each input window.
pub fn persistence_forecast(set: &SupervisedSet) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(DataError::EmptySet);
    }
    Ok(set
        .inputs
        .iter()
        .map(|w| *w.last().expect("lag >= 1"))
        .collect())
}

/// Train/validation/test windows normalized with train-only statistics.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: SupervisedSet,
    pub validation: SupervisedSet,
    pub test: SupervisedSet,
    pub norm: NormalizationParams,
    pub split: SplitIndices,
}

impl PreparedData {
    pub fn from_series(
        series: &TimeSeries,
        lag: usize,
        horizon: usize,
        block: usize,
        split_seed: u64,
    ) -> Result<Self> {
        let all = make_windows(series, lag, horizon)?;
        let split = block_split(all.len(), block, split_seed)?;
        let raw_train = all.subset(&split.train);
        let norm = raw_train.fit_normalization()?;
        Ok(Self {
            train: raw_train.renormalized(norm),
            validation: all.subset(&split.validation).renormalized(norm),
            test: all.subset(&split.test).renormalized(norm),
            norm,
            split,
        })
    }
}
