//! Peephole LSTM regression network: forward pass, backpropagation through
//! time, first-order optimizers and a minibatch training loop.

mod activ;
mod backprop;
mod checkpoint;
mod network;
mod optim;
mod train;

pub use backprop::{backward_bptt, loss_mse, predict_batch, BatchGradients};
pub use checkpoint::{Checkpoint, CheckpointError};
pub use network::{
    cell_forward, sequence_forward, GateRecord, LstmLayerParams, LstmNetwork, LstmState, OutputHead,
};
pub use optim::{optimizer_step, OptimizerKind, OptimizerState};
pub use train::{clip_global_norm, train, EpochStats, TrainConfig, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LstmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("prediction and target lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("optimizer state does not match parameter shapes")]
    ShapeMismatch,
    #[error("empty training or validation set")]
    EmptySet,
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
}

pub type Result<T> = std::result::Result<T, LstmError>;

pub(crate) use activ::{sigmoid, tanh};
