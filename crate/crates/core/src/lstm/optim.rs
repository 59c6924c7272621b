use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::network::LstmNetwork;
use super::{LstmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgdm,
    Adam,
    Rmsprop,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 3] = [Self::Sgdm, Self::Adam, Self::Rmsprop];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sgdm => "sgdm",
            Self::Adam => "adam",
            Self::Rmsprop => "rmsprop",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgdm" => Ok(Self::Sgdm),
            "adam" => Ok(Self::Adam),
            "rmsprop" => Ok(Self::Rmsprop),
            other => Err(format!("unknown optimizer `{other}`")),
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;
const SGD_MOMENTUM: f64 = 0.9;
const RMS_DECAY: f64 = 0.9;

/// Per-parameter accumulators, one buffer per parameter array of the network.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, net: &LstmNetwork) -> Self {
        let shapes: Vec<Vec<f64>> = net
            .param_slices()
            .iter()
            .map(|s| vec![0.0; s.len()])
            .collect();
        let second = match kind {
            OptimizerKind::Sgdm => Vec::new(),
            _ => shapes.clone(),
        };
        Self {
            kind,
            first: shapes,
            second,
            step: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Applies one update in place.
///
/// * adam: bias-corrected first/second moments (0.9, 0.999, eps 1e-8)
/// * sgdm: `v = 0.9 v + g`, `theta -= lr v`
/// * rmsprop: `s = 0.9 s + 0.1 g^2`, `theta -= lr g / (sqrt(s) + eps)`
pub fn optimizer_step(
    state: &mut OptimizerState,
    params: &mut LstmNetwork,
    grads: &LstmNetwork,
    learning_rate: f64,
) -> Result<()> {
    if !(learning_rate > 0.0) {
        return Err(LstmError::BadConfig(format!(
            "learning rate {learning_rate} must be positive"
        )));
    }
    let gs = grads.param_slices();
    let ps = params.param_slices_mut();
    let shapes_ok = gs.len() == ps.len()
        && state.first.len() == ps.len()
        && gs
            .iter()
            .zip(&ps)
            .zip(&state.first)
            .all(|((g, p), m)| g.len() == p.len() && m.len() == p.len());
    if !shapes_ok {
        return Err(LstmError::ShapeMismatch);
    }
    state.step += 1;
    let t = state.step as i32;
    match state.kind {
        OptimizerKind::Adam => {
            // bias corrections folded into the step size and epsilon:
            // (m / c1) / (sqrt(v / c2) + eps) = a m / (sqrt(v) + e)
            let c1 = 1.0 - ADAM_BETA1.powi(t);
            let c2 = 1.0 - ADAM_BETA2.powi(t);
            let a = learning_rate * c2.sqrt() / c1;
            let e = EPS * c2.sqrt();
            for (((p, g), m), v) in ps
                .into_iter()
                .zip(gs)
                .zip(&mut state.first)
                .zip(&mut state.second)
            {
                for (((p, g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= a * *m / (v.sqrt() + e);
                }
            }
        }
        OptimizerKind::Sgdm => {
            for ((p, g), v) in ps.into_iter().zip(gs).zip(&mut state.first) {
                for ((p, g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                    *v = SGD_MOMENTUM * *v + g;
                    *p -= learning_rate * *v;
                }
            }
        }
        OptimizerKind::Rmsprop => {
            for ((p, g), s) in ps.into_iter().zip(gs).zip(&mut state.second) {
                for ((p, g), s) in p.iter_mut().zip(g).zip(s.iter_mut()) {
                    *s = RMS_DECAY * *s + (1.0 - RMS_DECAY) * g * g;
                    *p -= learning_rate * g / (s.sqrt() + EPS);
                }
            }
        }
    }
    Ok(())
}
