//! Reproducible experiment runs behind the `windcast` command line.
//!
//! Each command reads an [`ExperimentConfig`], writes its products under
//! `config.out`, and returns the in-memory results. All randomness derives
//! from `config.seed` through [`crate::derive_seed`]:
//!
//! | stream | use |
//! |--------|-----|
//! | 1 | block split |
//! | 2 | synthetic series |
//! | 3 | CMA-ES tuning |
//! | 4 | grid search |
//! | 5 | tuning subsample |
//! | 1000 + r | repetition `r` of a training run |

mod config;
mod report;

pub use config::{DataConfig, ExperimentConfig, Horizon, ModelConfig, NamedHorizon, SynthConfig};
pub use report::{
    compare, summary_columns, Aggregate, Comparison, MetricComparison, RepetitionRecord, RunSummary,
};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{self, DataError, PreparedData, SupervisedSet, TimeSeries};
use crate::derive_seed;
use crate::lstm::{
    predict_batch, train, Checkpoint, CheckpointError, LstmError, LstmNetwork, TrainConfig,
};
use crate::metrics::{self, EvalReport};
use crate::tuner::{self, HyperParams, LstmObjective, Objective, Trial, TuneResult, TunerError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("checkpoint does not match the data: {0}")]
    IncompatibleCheckpoint(String),
    #[error("summaries differ in repetitions: {0}")]
    MismatchedRepetitions(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    /// Process exit status: 2 configuration, 3 data, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::MismatchedRepetitions(_) => 2,
            Self::Data(_) | Self::IncompatibleCheckpoint(_) => 3,
            Self::Runtime(_) | Self::Io(_) => 4,
        }
    }
}

impl From<DataError> for ExperimentError {
    fn from(e: DataError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<LstmError> for ExperimentError {
    fn from(e: LstmError) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<metrics::MetricsError> for ExperimentError {
    fn from(e: metrics::MetricsError) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<CheckpointError> for ExperimentError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Io(e) => Self::Io(e),
            other => Self::Data(other.to_string()),
        }
    }
}

impl From<TunerError> for ExperimentError {
    fn from(e: TunerError) -> Self {
        match e {
            TunerError::BadConfig(m) => Self::Config(m),
            TunerError::EmptyBudget | TunerError::EmptyGrid => Self::Config(e.to_string()),
            TunerError::Io(e) => Self::Io(e),
            other => Self::Runtime(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

fn ready(cfg: &ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = cfg.clone();
    cfg.resolve_seeds();
    cfg.validate()?;
    Ok(cfg)
}

/// Loads the CSV or generates the synthetic series named by the config.
pub fn load_series(cfg: &ExperimentConfig) -> Result<TimeSeries> {
    let cfg = ready(cfg)?;
    if let Some(path) = &cfg.data.csv {
        return Ok(data::load_csv(path, &cfg.data.column)?);
    }
    let s = cfg.data.synth.as_ref().expect("validated");
    Ok(data::synth_wind(
        s.n,
        s.step_minutes,
        s.seed.expect("resolved"),
        s.params(),
    )?)
}

/// Windows, splits and normalizes the configured series.
pub fn prepare(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let cfg = ready(cfg)?;
    let series = load_series(&cfg)?;
    Ok(PreparedData::from_series(
        &series,
        cfg.lag(),
        cfg.horizon(),
        cfg.data.block,
        cfg.data.split_seed.expect("resolved"),
    )?)
}

/// Writes the synthetic series to `<out>/synth.csv`.
pub fn cmd_synth(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let mut cfg = cfg.clone();
    if cfg.data.csv.is_none() && cfg.data.synth.is_none() {
        cfg.data.synth = Some(SynthConfig::default());
    }
    if cfg.data.synth.is_none() {
        return Err(ExperimentError::Config(
            "synth needs a [data.synth] section, not data.csv".into(),
        ));
    }
    let series = load_series(&cfg)?;
    std::fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join("synth.csv");
    series.save_csv(&path)?;
    Ok(path)
}

fn denorm(set: &SupervisedSet, pred: &[f64]) -> Vec<f64> {
    pred.iter().map(|&p| set.norm.denormalize(p)).collect()
}

/// Physical-unit predictions and the five indices on one partition.
pub fn evaluate_set(net: &LstmNetwork, set: &SupervisedSet) -> Result<(Vec<f64>, EvalReport)> {
    let pred = denorm(set, &predict_batch(net, &set.inputs)?);
    let report = metrics::evaluate_excluding_calms(&pred, &set.targets_denormalized())?;
    Ok((pred, report))
}

fn capped(set: &SupervisedSet, max: Option<usize>, seed: u64) -> SupervisedSet {
    match max {
        Some(m) if m < set.len() => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, set.len(), m).into_vec();
            idx.sort_unstable();
            set.subset(&idx)
        }
        _ => set.clone(),
    }
}

fn run_workers<T: Send, F: Fn(usize) -> Result<T> + Sync + Send>(n: usize, f: F) -> Result<Vec<T>> {
    let threads = tuner::worker_threads();
    if threads <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| ExperimentError::Runtime(e.to_string()))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

/// Output of [`cmd_train`].
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub summary: RunSummary,
    pub checkpoints: Vec<PathBuf>,
}

fn checkpoint_for(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    net: LstmNetwork,
    seed: u64,
) -> Checkpoint {
    let mut meta = BTreeMap::new();
    meta.insert(
        "split_seed".into(),
        cfg.data.split_seed.expect("resolved").to_string(),
    );
    meta.insert("block".into(), cfg.data.block.to_string());
    meta.insert("experiment_seed".into(), cfg.seed.to_string());
    Checkpoint {
        network: net,
        norm: data.norm,
        lag: cfg.lag(),
        horizon: cfg.horizon(),
        seed,
        meta,
    }
}

/// Trains `hidden`/`model` for every repetition and reports train and test
/// metrics; checkpoints go to `<out>/<stem>/rep_XX.ckpt`.
fn train_repetitions(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    hidden: &[usize],
    tc_for: impl Fn(u64) -> TrainConfig + Sync,
    label: &str,
    stem: &str,
) -> Result<TrainRun> {
    let dir = cfg.out.join(stem);
    std::fs::create_dir_all(&dir)?;
    let train_set = capped(
        &data.train,
        cfg.model.max_train_samples,
        derive_seed(cfg.seed, 5),
    );
    let results = run_workers(cfg.repetitions, |rep| {
        let seed = derive_seed(cfg.seed, 1000 + rep as u64);
        let net = LstmNetwork::random(1, hidden, derive_seed(seed, 0));
        let out = train(
            net,
            &train_set,
            &data.validation,
            &tc_for(derive_seed(seed, 1)),
        )?;
        let (_, train_report) = evaluate_set(&out.network, &train_set)?;
        let (_, test_report) = evaluate_set(&out.network, &data.test)?;
        let mut ck = checkpoint_for(cfg, data, out.network, seed);
        ck.meta.insert("rep".into(), rep.to_string());
        ck.meta
            .insert("train_rmse".into(), format!("{:?}", train_report.rmse));
        ck.meta
            .insert("test_rmse".into(), format!("{:?}", test_report.rmse));
        if let Some(m) = cfg.model.max_train_samples {
            ck.meta.insert("max_train_samples".into(), m.to_string());
        }
        let path = dir.join(format!("rep_{rep:02}.ckpt"));
        ck.save(&path)?;
        Ok((
            RepetitionRecord {
                rep,
                seed,
                train: train_report,
                test: test_report,
                runtime_s: out.seconds,
            },
            path,
        ))
    })?;
    let (reps, checkpoints): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let summary = RunSummary::new(label, reps);
    summary.save(&dir, "summary")?;
    Ok(TrainRun {
        summary,
        checkpoints,
    })
}

/// Trains the fixed model of `[model]` for every repetition.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainRun> {
    let cfg = ready(cfg)?;
    let data = prepare(&cfg)?;
    std::fs::write(cfg.out_dir_create()?.join("config.toml"), cfg.to_toml())?;
    let m = cfg.model.clone();
    train_repetitions(
        &cfg,
        &data,
        &m.hidden,
        |seed| {
            let mut tc =
                TrainConfig::new(m.optimizer, m.learning_rate, m.batch_size, m.epochs, seed);
            tc.clip_norm = m.clip_norm;
            tc
        },
        "lstm",
        "train",
    )
}

impl ExperimentConfig {
    fn out_dir_create(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out)?;
        Ok(&self.out)
    }
}

/// Output of [`cmd_tune`].
#[derive(Debug, Clone)]
pub struct TuneRun {
    pub tune: TuneResult,
    pub retrain: TrainRun,
}

fn objective(cfg: &ExperimentConfig, data: &PreparedData) -> Result<LstmObjective> {
    Ok(LstmObjective::new(
        data,
        cfg.fitness.clone(),
        derive_seed(cfg.seed, 5),
    )?)
}

fn write_tune_files(dir: &Path, res: &TuneResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    res.write_ledger(dir.join("ledger.tsv"))?;
    std::fs::write(dir.join("best.txt"), res.summary_kv())?;
    if !res.trace.is_empty() {
        std::fs::write(dir.join("trace.tsv"), crate::cmaes::trace_tsv(&res.trace))?;
    }
    Ok(())
}

/// CMA-ES tuning, then a full retrain of the best configuration with
/// `[model]` epochs and the configured repetitions.
pub fn cmd_tune(cfg: &ExperimentConfig) -> Result<TuneRun> {
    let cfg = ready(cfg)?;
    let data = prepare(&cfg)?;
    std::fs::write(cfg.out_dir_create()?.join("config.toml"), cfg.to_toml())?;
    let obj = objective(&cfg, &data)?;
    let tune = tuner::cmaes_tune(&obj, &cfg.fitness, &cfg.cmaes)?;
    write_tune_files(&cfg.out.join("tune"), &tune)?;
    let best = tune.best_hp();
    let epochs = cfg.model.epochs;
    let clip = cfg.model.clip_norm;
    let retrain = train_repetitions(
        &cfg,
        &data,
        &best.hidden_sizes(),
        |seed| {
            let mut tc = TrainConfig::new(
                best.optimizer,
                best.learning_rate,
                best.batch_size,
                epochs,
                seed,
            );
            tc.clip_norm = clip;
            tc
        },
        "cmaes-lstm",
        "retrain",
    )?;
    Ok(TuneRun { tune, retrain })
}

/// Runs the penalty ablation and writes both arms plus a side-by-side table
/// to `<out>/ablation`.
pub fn cmd_ablation(cfg: &ExperimentConfig) -> Result<tuner::Ablation> {
    let cfg = ready(cfg)?;
    let data = prepare(&cfg)?;
    let obj = objective(&cfg, &data)?;
    let ab = tuner::ablation_runtime_penalty(&obj, &cfg.fitness, &cfg.cmaes)?;
    let dir = cfg.out.join("ablation");
    write_tune_files(&dir.join("R"), &ab.with_penalty)?;
    write_tune_files(&dir.join("WR"), &ab.without_penalty)?;
    std::fs::write(dir.join("comparison.tsv"), ab.report_tsv())?;
    Ok(ab)
}

/// One cell of the grid-search surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Validation RMSE as recorded in the ledger.
    pub val_rmse: f64,
    pub fitness: f64,
    pub test_rmse: f64,
    pub test_r: f64,
}

/// Output of [`cmd_grid`].
#[derive(Debug, Clone)]
pub struct GridRun {
    pub tune: TuneResult,
    pub surface: Vec<SurfacePoint>,
}

struct TestScoring<'a> {
    inner: &'a LstmObjective,
    test: &'a SupervisedSet,
    scores: Mutex<Vec<(HyperParams, f64, f64)>>,
}

impl Objective for TestScoring<'_> {
    fn evaluate(&self, hp: &HyperParams, seed: u64) -> std::result::Result<Trial, TunerError> {
        let trial = self.inner.evaluate(hp, seed)?;
        let (rmse, r) = match &trial.network {
            Some(net) => {
                let (_, rep) = evaluate_set(net, self.test)
                    .map_err(|e| TunerError::BadConfig(e.to_string()))?;
                (rep.rmse, rep.r)
            }
            None => (f64::NAN, f64::NAN),
        };
        self.scores
            .lock()
            .expect("not poisoned")
            .push((*hp, rmse, r));
        Ok(trial)
    }
}

pub fn surface_tsv(surface: &[SurfacePoint]) -> String {
    let mut s = String::from("L_R\tB_S\tval_rmse\tfitness\ttest_rmse\ttest_r\n");
    for p in surface {
        let _ = writeln!(
            s,
            "{:?}\t{}\t{:?}\t{:?}\t{:?}\t{:?}",
            p.learning_rate, p.batch_size, p.val_rmse, p.fitness, p.test_rmse, p.test_r
        );
    }
    s
}

/// Full-factorial learning-rate by batch-size search with the fixed layers
/// and optimizer of `[grid]`; writes the ledger and the surface table.
pub fn cmd_grid(cfg: &ExperimentConfig) -> Result<GridRun> {
    let cfg = ready(cfg)?;
    let data = prepare(&cfg)?;
    std::fs::write(cfg.out_dir_create()?.join("config.toml"), cfg.to_toml())?;
    let inner = objective(&cfg, &data)?;
    let scoring = TestScoring {
        inner: &inner,
        test: &data.test,
        scores: Mutex::new(Vec::new()),
    };
    let tune = tuner::grid_tune(&scoring, &cfg.fitness, &cfg.grid)?;
    let scores = scoring.scores.into_inner().expect("not poisoned");
    let surface: Vec<SurfacePoint> = tune
        .entries
        .iter()
        .map(|e| {
            let (_, test_rmse, test_r) = scores
                .iter()
                .find(|s| s.0 == e.hp)
                .copied()
                .expect("scored");
            SurfacePoint {
                learning_rate: e.hp.learning_rate,
                batch_size: e.hp.batch_size,
                val_rmse: e.rmse,
                fitness: e.fitness,
                test_rmse,
                test_r,
            }
        })
        .collect();
    let dir = cfg.out.join("grid");
    write_tune_files(&dir, &tune)?;
    std::fs::write(dir.join("surface.tsv"), surface_tsv(&surface))?;
    Ok(GridRun { tune, surface })
}

/// Output of [`cmd_evaluate`].
#[derive(Debug, Clone)]
pub struct EvalRun {
    pub train: EvalReport,
    pub test: EvalReport,
    pub predictions: PathBuf,
}

fn write_predictions(
    path: &Path,
    series: &TimeSeries,
    set: &SupervisedSet,
    pred: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| ExperimentError::Io(e.into()))?;
    let io = |e: csv::Error| ExperimentError::Io(e.into());
    w.write_record(["timestamp", "observed", "predicted"])
        .map_err(io)?;
    for ((&idx, obs), p) in set
        .target_index
        .iter()
        .zip(set.targets_denormalized())
        .zip(pred)
    {
        let ts = series
            .timestamp(idx)
            .format(data::TIMESTAMP_FORMAT)
            .to_string();
        w.write_record([ts, format!("{obs:?}"), format!("{p:?}")])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Scores a checkpoint on the configured data, re-deriving the split the
/// checkpoint was trained with. Writes `eval_{train,test}.txt` and
/// `predictions_{train,test}.csv` under `<out>/evaluate`.
pub fn cmd_evaluate(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<EvalRun> {
    let mut cfg = ready(cfg)?;
    let ck = Checkpoint::load(checkpoint)?;
    if let Some(lag) = cfg.data.lag {
        if lag != ck.lag {
            return Err(ExperimentError::IncompatibleCheckpoint(format!(
                "config lag {lag}, checkpoint lag {}",
                ck.lag
            )));
        }
    }
    if cfg.horizon() != ck.horizon {
        return Err(ExperimentError::IncompatibleCheckpoint(format!(
            "config horizon {}, checkpoint horizon {}",
            cfg.horizon(),
            ck.horizon
        )));
    }
    cfg.data.lag = Some(ck.lag);
    let meta_num = |k: &str| ck.meta.get(k).and_then(|v| v.parse::<u64>().ok());
    if let Some(s) = meta_num("split_seed") {
        cfg.data.split_seed = Some(s);
    }
    if let Some(b) = meta_num("block") {
        cfg.data.block = b as usize;
    }
    let series = load_series(&cfg)?;
    let data = PreparedData::from_series(
        &series,
        ck.lag,
        ck.horizon,
        cfg.data.block,
        cfg.data.split_seed.expect("resolved"),
    )?;
    let train_set = match meta_num("max_train_samples") {
        Some(m) => capped(
            &data.train,
            Some(m as usize),
            derive_seed(meta_num("experiment_seed").unwrap_or(cfg.seed), 5),
        ),
        None => data.train.clone(),
    };
    let train_set = train_set.renormalized(ck.norm);
    let test_set = data.test.renormalized(ck.norm);
    let (train_pred, train) = evaluate_set(&ck.network, &train_set)?;
    let (test_pred, test) = evaluate_set(&ck.network, &test_set)?;
    let dir = cfg.out.join("evaluate");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("eval_train.txt"), train.to_kv())?;
    std::fs::write(dir.join("eval_test.txt"), test.to_kv())?;
    write_predictions(
        &dir.join("predictions_train.csv"),
        &series,
        &train_set,
        &train_pred,
    )?;
    let predictions = dir.join("predictions_test.csv");
    write_predictions(&predictions, &series, &test_set, &test_pred)?;
    Ok(EvalRun {
        train,
        test,
        predictions,
    })
}

/// Friedman ranking of several run summaries (`summary.json` files); writes
/// `compare.tsv` and `compare_ranks.tsv` under `out`.
pub fn cmd_compare(summaries: &[PathBuf], out: &Path) -> Result<Comparison> {
    let loaded: Vec<RunSummary> = summaries
        .iter()
        .map(|p| {
            let mut s = RunSummary::load_json(p)?;
            // label by path so two runs of the same command stay apart
            s.label = p.display().to_string();
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let cmp = compare(&loaded)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("compare.tsv"), cmp.to_tsv())?;
    std::fs::write(out.join("compare_ranks.tsv"), cmp.ranks_tsv())?;
    Ok(cmp)
}

/// Persistence predictions and metrics on the test partition.
pub fn persistence_report(data: &PreparedData) -> Result<EvalReport> {
    let pred = denorm(&data.test, &data::persistence_forecast(&data.test)?);
    Ok(metrics::evaluate_excluding_calms(
        &pred,
        &data.test.targets_denormalized(),
    )?)
}
