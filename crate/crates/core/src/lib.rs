//! Short-term wind-speed forecasting with peephole LSTM networks whose
//! hyperparameters are tuned by CMA-ES under a runtime-penalized RMSE
//! objective.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`] ingests, windows, splits and synthesizes wind-speed series;
//! * [`lstm`] holds the network, backpropagation through time, optimizers
//!   and the training loop;
//! * [`metrics`] computes MSE/RMSE/MAE/MAPE/R and Friedman mean ranks;
//! * [`cmaes`] is an ask/tell CMA-ES with box constraints;
//! * [`tuner`] maps genomes to hyperparameters and runs CMA-ES or grid search;
//! * [`experiment`] wires everything into reproducible runs and file outputs
//!   (the `windcast` binary is a thin shell around it).

pub mod cmaes;
pub mod data;
pub mod experiment;
pub mod lstm;
pub mod metrics;
pub mod tuner;

/// Derives an independent child seed from `base` and a stream index
/// (SplitMix64 finalizer over a Weyl step). Every seeded component of the
/// crate gets its seed through this function.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
