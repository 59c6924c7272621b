//! Search-space encoding.
//!
//! CMA-ES works on the unit cube `[0, 1]^6`. Learning rate and batch size
//! span several orders of magnitude and are searched on a log scale; the
//! other genes map linearly:
//!
//! | gene | hyperparameter | decode |
//! |------|----------------|--------|
//! | 0 | hidden layers | `1 + round(u)` |
//! | 1 | units, layer 1 | `round(30 + 200 u)` |
//! | 2 | units, layer 2 | same; inert with one layer |
//! | 3 | learning rate | `10^(-5 + 4 u)` |
//! | 4 | batch size | `round(8 * 128^u)` |
//! | 5 | optimizer | `floor(3 u)` over sgdm, adam, rmsprop |

use std::fmt;

use serde::{Deserialize, Serialize};

use super::TunerError;
use crate::lstm::OptimizerKind;

pub const GENOME_LEN: usize = 6;
pub const MIN_LAYERS: usize = 1;
pub const MAX_LAYERS: usize = 2;
pub const MIN_UNITS: usize = 30;
pub const MAX_UNITS: usize = 230;
pub const MIN_LOG10_LR: f64 = -5.0;
pub const MAX_LOG10_LR: f64 = -1.0;
pub const MIN_LR: f64 = 1e-5;
pub const MAX_LR: f64 = 1e-1;
pub const MIN_BATCH: usize = 8;
pub const MAX_BATCH: usize = 1024;

/// Optimizer order of the categorical gene.
pub const OPTIMIZER_ORDER: [OptimizerKind; 3] = [
    OptimizerKind::Sgdm,
    OptimizerKind::Adam,
    OptimizerKind::Rmsprop,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub hidden_layers: usize,
    /// Units per layer; `units[1]` is carried but unused when
    /// `hidden_layers == 1`.
    pub units: [usize; 2],
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
}

impl HyperParams {
    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.units[..self.hidden_layers].to_vec()
    }

    pub fn within_bounds(&self) -> bool {
        (MIN_LAYERS..=MAX_LAYERS).contains(&self.hidden_layers)
            && self
                .units
                .iter()
                .all(|u| (MIN_UNITS..=MAX_UNITS).contains(u))
            && (MIN_LR..=MAX_LR).contains(&self.learning_rate)
            && (MIN_BATCH..=MAX_BATCH).contains(&self.batch_size)
    }
}

impl fmt::Display for HyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let units: Vec<String> = self.hidden_sizes().iter().map(|u| u.to_string()).collect();
        write!(
            f,
            "layers={} units=[{}] lr={:.3e} batch={} opt={}",
            self.hidden_layers,
            units.join(","),
            self.learning_rate,
            self.batch_size,
            self.optimizer
        )
    }
}

fn lerp_round(u: f64, lo: usize, hi: usize) -> usize {
    (lo as f64 + u * (hi - lo) as f64).round() as usize
}

fn unlerp(v: usize, lo: usize, hi: usize) -> f64 {
    (v - lo) as f64 / (hi - lo) as f64
}

/// Decodes a unit-cube genome. Coordinates outside `[0, 1]` are an error;
/// repaired genomes from CMA-ES always decode.
pub fn decode(genome: &[f64]) -> Result<HyperParams, TunerError> {
    if genome.len() != GENOME_LEN {
        return Err(TunerError::BadConfig(format!(
            "genome has {} genes, expected {GENOME_LEN}",
            genome.len()
        )));
    }
    if let Some((index, &value)) = genome
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(TunerError::OutOfRangeGenome { index, value });
    }
    let op = ((3.0 * genome[5]).floor() as usize).min(2);
    Ok(HyperParams {
        hidden_layers: MIN_LAYERS + genome[0].round() as usize,
        units: [
            lerp_round(genome[1], MIN_UNITS, MAX_UNITS),
            lerp_round(genome[2], MIN_UNITS, MAX_UNITS),
        ],
        learning_rate: 10f64
            .powf(MIN_LOG10_LR + genome[3] * (MAX_LOG10_LR - MIN_LOG10_LR))
            .clamp(MIN_LR, MAX_LR),
        batch_size: ((MIN_BATCH as f64) * (MAX_BATCH as f64 / MIN_BATCH as f64).powf(genome[4]))
            .round()
            .clamp(MIN_BATCH as f64, MAX_BATCH as f64) as usize,
        optimizer: OPTIMIZER_ORDER[op],
    })
}

/// Inverse of [`decode`]: integer genes map to their exact preimage and the
/// optimizer to the centre of its bin.
pub fn encode(hp: &HyperParams) -> Result<Vec<f64>, TunerError> {
    if !hp.within_bounds() {
        return Err(TunerError::BadConfig(format!(
            "hyperparameters out of bounds: {hp}"
        )));
    }
    let op = OPTIMIZER_ORDER
        .iter()
        .position(|o| *o == hp.optimizer)
        .expect("all kinds listed");
    let lr =
        ((hp.learning_rate.log10() - MIN_LOG10_LR) / (MAX_LOG10_LR - MIN_LOG10_LR)).clamp(0.0, 1.0);
    Ok(vec![
        (hp.hidden_layers - MIN_LAYERS) as f64,
        unlerp(hp.units[0], MIN_UNITS, MAX_UNITS),
        unlerp(hp.units[1], MIN_UNITS, MAX_UNITS),
        lr,
        ((hp.batch_size as f64 / MIN_BATCH as f64).ln()
            / (MAX_BATCH as f64 / MIN_BATCH as f64).ln())
        .clamp(0.0, 1.0),
        (op as f64 + 0.5) / 3.0,
    ])
}
