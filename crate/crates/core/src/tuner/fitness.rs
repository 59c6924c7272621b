use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::genotype::HyperParams;
use super::TunerError;
use crate::data::{PreparedData, SupervisedSet};
use crate::derive_seed;
use crate::lstm::{predict_batch, train, LstmError, LstmNetwork, TrainConfig};
use crate::metrics;

/// RMSE recorded for a training run that diverged.
pub const DIVERGED_RMSE: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitnessConfig {
    /// Penalty weight ω.
    pub omega: f64,
    /// Runtime threshold ρ in seconds.
    pub rho: f64,
    pub epochs: usize,
    /// Trainings per candidate; RMSE and runtime are averaged.
    pub repetitions: usize,
    /// Train on a fixed random subset of at most this many windows.
    pub max_train_samples: Option<usize>,
    /// Score on a fixed random subset of at most this many windows.
    pub max_val_samples: Option<usize>,
    pub clip_norm: Option<f64>,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        Self {
            omega: 1e-3,
            rho: 600.0,
            epochs: 100,
            repetitions: 1,
            max_train_samples: None,
            max_val_samples: None,
            clip_norm: Some(1.0),
        }
    }
}

impl FitnessConfig {
    pub fn validate(&self) -> Result<(), TunerError> {
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(TunerError::BadConfig(format!(
                "omega {} must be >= 0",
                self.omega
            )));
        }
        if !(self.rho > 0.0) {
            return Err(TunerError::BadConfig(format!(
                "rho {} must be > 0",
                self.rho
            )));
        }
        if self.epochs == 0 || self.repetitions == 0 {
            return Err(TunerError::BadConfig(
                "epochs and repetitions must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `rmse + ω · penalty(runtime, ρ)`.
    pub fn fitness(&self, rmse: f64, runtime_s: f64) -> f64 {
        rmse + self.omega * penalty(runtime_s, self.rho)
    }
}

/// Training time beyond the threshold, zero at or below it.
pub fn penalty(runtime_s: f64, rho: f64) -> f64 {
    (runtime_s - rho).max(0.0)
}

/// Outcome of training one candidate.
#[derive(Debug, Clone)]
pub struct Trial {
    /// Validation RMSE in physical units, or [`DIVERGED_RMSE`].
    pub rmse: f64,
    pub runtime_s: f64,
    pub diverged: bool,
    pub network: Option<LstmNetwork>,
}

impl Trial {
    pub fn scored(rmse: f64, runtime_s: f64) -> Self {
        Self {
            rmse,
            runtime_s,
            diverged: false,
            network: None,
        }
    }
}

/// Anything that can score a hyperparameter set. Closures
/// `Fn(&HyperParams, u64) -> Trial` qualify, which is how tests plug in
/// synthetic objectives.
pub trait Objective: Sync {
    fn evaluate(&self, hp: &HyperParams, seed: u64) -> Result<Trial, TunerError>;
}

impl<F> Objective for F
where
    F: Fn(&HyperParams, u64) -> Trial + Sync,
{
    fn evaluate(&self, hp: &HyperParams, seed: u64) -> Result<Trial, TunerError> {
        Ok(self(hp, seed))
    }
}

fn cap(set: &SupervisedSet, max: Option<usize>, seed: u64) -> SupervisedSet {
    match max {
        Some(m) if m < set.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = sample(&mut rng, set.len(), m).into_vec();
            idx.sort_unstable();
            set.subset(&idx)
        }
        _ => set.clone(),
    }
}

/// Trains a fresh network per candidate and scores it on validation data.
#[derive(Debug, Clone)]
pub struct LstmObjective {
    pub train: SupervisedSet,
    pub validation: SupervisedSet,
    pub cfg: FitnessConfig,
}

impl LstmObjective {
    /// Uses the training and validation partitions of `data`, subsampled
    /// once (seeded) when the config caps their size.
    pub fn new(
        data: &PreparedData,
        cfg: FitnessConfig,
        subsample_seed: u64,
    ) -> Result<Self, TunerError> {
        cfg.validate()?;
        let train = cap(
            &data.train,
            cfg.max_train_samples,
            derive_seed(subsample_seed, 0),
        );
        let validation = cap(
            &data.validation,
            cfg.max_val_samples,
            derive_seed(subsample_seed, 1),
        );
        if train.is_empty() || validation.is_empty() {
            return Err(TunerError::BadConfig(
                "empty training or validation data".into(),
            ));
        }
        Ok(Self {
            train,
            validation,
            cfg,
        })
    }

    fn train_once(&self, hp: &HyperParams, seed: u64) -> Result<Trial, TunerError> {
        let net = LstmNetwork::random(1, &hp.hidden_sizes(), derive_seed(seed, 0));
        let mut tc = TrainConfig::new(
            hp.optimizer,
            hp.learning_rate,
            hp.batch_size,
            self.cfg.epochs,
            derive_seed(seed, 1),
        );
        tc.clip_norm = self.cfg.clip_norm;
        match train(net, &self.train, &self.validation, &tc) {
            Ok(out) => {
                let norm = self.validation.norm;
                let pred: Vec<f64> = predict_batch(&out.network, &self.validation.inputs)?
                    .into_iter()
                    .map(|p| norm.denormalize(p))
                    .collect();
                let rmse = metrics::rmse(&pred, &self.validation.targets_denormalized())?;
                Ok(Trial {
                    rmse,
                    runtime_s: out.seconds,
                    diverged: false,
                    network: Some(out.network),
                })
            }
            Err(LstmError::NonFiniteLoss { .. }) => Ok(Trial {
                rmse: DIVERGED_RMSE,
                runtime_s: 0.0,
                diverged: true,
                network: None,
            }),
            Err(e) => Err(e.into()),
        }
    }
}

impl Objective for LstmObjective {
    fn evaluate(&self, hp: &HyperParams, seed: u64) -> Result<Trial, TunerError> {
        let reps = self.cfg.repetitions;
        let mut rmse = 0.0;
        let mut runtime = 0.0;
        let mut best: Option<(f64, LstmNetwork)> = None;
        let mut diverged = false;
        for r in 0..reps {
            let t = self.train_once(hp, derive_seed(seed, 100 + r as u64))?;
            if t.diverged {
                diverged = true;
                break;
            }
            rmse += t.rmse / reps as f64;
            runtime += t.runtime_s / reps as f64;
            if let Some(net) = t.network {
                if best.as_ref().map_or(true, |(b, _)| t.rmse < *b) {
                    best = Some((t.rmse, net));
                }
            }
        }
        if diverged {
            return Ok(Trial {
                rmse: DIVERGED_RMSE,
                runtime_s: runtime,
                diverged: true,
                network: None,
            });
        }
        Ok(Trial {
            rmse,
            runtime_s: runtime,
            diverged: false,
            network: best.map(|b| b.1),
        })
    }
}
