//! Hyperparameter search: genotype encoding, the runtime-penalized fitness,
//! and CMA-ES / grid drivers that keep a full evaluation ledger.

mod fitness;
mod genotype;
mod search;

pub use fitness::{penalty, FitnessConfig, LstmObjective, Objective, Trial, DIVERGED_RMSE};
pub use genotype::{
    decode, encode, HyperParams, GENOME_LEN, MAX_BATCH, MAX_LAYERS, MAX_LR, MAX_UNITS, MIN_BATCH,
    MIN_LAYERS, MIN_LR, MIN_UNITS, OPTIMIZER_ORDER,
};
pub use search::{
    ablation_runtime_penalty, cmaes_tune, grid_tune, read_ledger, worker_threads, Ablation,
    ArmSummary, GridSpec, LedgerEntry, TuneResult, TuneSettings, LEDGER_HEADER, THREADS_ENV,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TunerError {
    #[error("genome coordinate {index} = {value} outside [0, 1]")]
    OutOfRangeGenome { index: usize, value: f64 },
    #[error("tuning budget is zero")]
    EmptyBudget,
    #[error("grid has no points")]
    EmptyGrid,
    #[error("invalid tuner configuration: {0}")]
    BadConfig(String),
    #[error("ledger parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Cmaes(#[from] crate::cmaes::CmaesError),
    #[error(transparent)]
    Lstm(#[from] crate::lstm::LstmError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
