use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::backprop::{backward_bptt, loss_mse, predict_batch};
use super::network::LstmNetwork;
use super::optim::{optimizer_step, OptimizerKind, OptimizerState};
use super::{LstmError, Result};
use crate::data::SupervisedSet;

/// Batch losses above this are treated as divergence. Targets are min-max
/// normalized, so a sane model never comes within orders of magnitude.
pub const DIVERGENCE_CEILING: f64 = 1e4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Global-norm gradient clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl TrainConfig {
    pub fn new(
        optimizer: OptimizerKind,
        learning_rate: f64,
        batch_size: usize,
        epochs: usize,
        seed: u64,
    ) -> Self {
        Self {
            epochs,
            batch_size,
            learning_rate,
            optimizer,
            seed,
            clip_norm: Some(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean squared error over the epoch's minibatches (normalized units).
    pub train_mse: f64,
    /// Validation RMSE after the epoch (normalized units).
    pub val_rmse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation RMSE.
    pub network: LstmNetwork,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub seconds: f64,
}

impl TrainOutcome {
    pub fn best_val_rmse(&self) -> f64 {
        self.history[self.best_epoch].val_rmse
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_global_norm(grads: &mut LstmNetwork, max_norm: f64) -> f64 {
    let norm = grads
        .param_slices()
        .iter()
        .flat_map(|s| s.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm.is_finite() {
        let k = max_norm / norm;
        for s in grads.param_slices_mut() {
            s.iter_mut().for_each(|g| *g *= k);
        }
    }
    norm
}

fn rmse_on(net: &LstmNetwork, set: &SupervisedSet) -> Result<f64> {
    let preds = predict_batch(net, &set.inputs)?;
    Ok(loss_mse(&preds, &set.targets)?.sqrt())
}

/// Minibatch training with a seeded per-epoch shuffle.
///
/// The last partial batch of each epoch is kept. Validation RMSE is recorded
/// after every epoch and the best-scoring parameters are returned. A
/// non-finite or exploding batch loss aborts with [`LstmError::NonFiniteLoss`].
pub fn train(
    mut net: LstmNetwork,
    train_set: &SupervisedSet,
    val_set: &SupervisedSet,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(LstmError::EmptySet);
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(LstmError::BadConfig(
            "epochs and batch size must be positive".into(),
        ));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(LstmError::BadConfig(format!(
            "learning rate {}",
            cfg.learning_rate
        )));
    }
    net.validate()?;

    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = OptimizerState::new(cfg.optimizer, &net);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, LstmNetwork)> = None;
    let mut windows: Vec<&[f64]> = Vec::with_capacity(cfg.batch_size);
    let mut targets: Vec<f64> = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sse = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            windows.clear();
            targets.clear();
            for &i in chunk {
                windows.push(&train_set.inputs[i]);
                targets.push(train_set.targets[i]);
            }
            let mut bg = backward_bptt(&net, &windows, &targets)?;
            if !bg.loss.is_finite() || bg.loss > DIVERGENCE_CEILING {
                return Err(LstmError::NonFiniteLoss {
                    epoch,
                    loss: bg.loss,
                });
            }
            sse += bg.loss * chunk.len() as f64;
            if let Some(max) = cfg.clip_norm {
                let norm = clip_global_norm(&mut bg.grads, max);
                if !norm.is_finite() {
                    return Err(LstmError::NonFiniteLoss { epoch, loss: norm });
                }
            }
            optimizer_step(&mut opt, &mut net, &bg.grads, cfg.learning_rate)?;
        }
        let train_mse = sse / train_set.len() as f64;
        let val_rmse = rmse_on(&net, val_set)?;
        if !val_rmse.is_finite() {
            return Err(LstmError::NonFiniteLoss {
                epoch,
                loss: val_rmse,
            });
        }
        history.push(EpochStats {
            epoch,
            train_mse,
            val_rmse,
        });
        if best.as_ref().map_or(true, |(_, b, _)| val_rmse < *b) {
            best = Some((epoch, val_rmse, net.clone()));
        }
    }
    let (best_epoch, _, network) = best.expect("epochs > 0");
    Ok(TrainOutcome {
        network,
        history,
        best_epoch,
        seconds: started.elapsed().as_secs_f64(),
    })
}
