use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sigmoid, tanh, LstmError, Result};

/// Gate block order used in every stacked matrix: input, forget, cell, output.
pub const GATES: usize = 4;
pub(crate) const GATE_I: usize = 0;
pub(crate) const GATE_F: usize = 1;
pub(crate) const GATE_C: usize = 2;
pub(crate) const GATE_O: usize = 3;

/// Weights of one peephole LSTM layer with input size `D` and `U` units.
///
/// Gate matrices are stacked row-wise in the order input, forget, cell,
/// output, so `w_x` is `4U x D` and `w_m` is `4U x U`, both row-major. The
/// peephole weights are diagonal and stored as three length-`U` vectors
/// (input, forget, output); the cell candidate has no peephole.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub input_size: usize,
    pub hidden: usize,
    pub w_x: Vec<f64>,
    pub w_m: Vec<f64>,
    pub w_peep: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input_size: usize, hidden: usize) -> Self {
        Self {
            input_size,
            hidden,
            w_x: vec![0.0; GATES * hidden * input_size],
            w_m: vec![0.0; GATES * hidden * hidden],
            w_peep: vec![0.0; 3 * hidden],
            bias: vec![0.0; GATES * hidden],
        }
    }

    /// Rows of `w_x` belonging to one gate (`U x D`).
    pub fn gate_input_weights(&self, gate: usize) -> &[f64] {
        let n = self.hidden * self.input_size;
        &self.w_x[gate * n..(gate + 1) * n]
    }

    /// Rows of `w_m` belonging to one gate (`U x U`).
    pub fn gate_recurrent_weights(&self, gate: usize) -> &[f64] {
        let n = self.hidden * self.hidden;
        &self.w_m[gate * n..(gate + 1) * n]
    }

    pub fn gate_bias(&self, gate: usize) -> &[f64] {
        &self.bias[gate * self.hidden..(gate + 1) * self.hidden]
    }

    /// Peephole vector for gate input (0), forget (1) or output (2).
    pub fn peephole(&self, which: usize) -> &[f64] {
        &self.w_peep[which * self.hidden..(which + 1) * self.hidden]
    }

    fn check(&self) -> Result<()> {
        let (d, u) = (self.input_size, self.hidden);
        if self.w_x.len() != GATES * u * d
            || self.w_m.len() != GATES * u * u
            || self.w_peep.len() != 3 * u
            || self.bias.len() != GATES * u
        {
            return Err(LstmError::DimensionMismatch(format!(
                "layer arrays do not match D={d}, U={u}"
            )));
        }
        Ok(())
    }
}

/// Linear read-out `y = w . m + b` from the last layer.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub c: Vec<f64>,
    pub m: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            c: vec![0.0; hidden],
            m: vec![0.0; hidden],
        }
    }
}

/// Gate activations produced by one cell step.
#[derive(Debug, Clone, PartialEq)]
pub struct GateRecord {
    pub input: Vec<f64>,
    pub forget: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
}

/// One step of the peephole cell:
///
/// ```text
/// i = sigmoid(Wix x + Wim m' + wic * c' + bi)
/// f = sigmoid(Wfx x + Wfm m' + wfc * c' + bf)
/// c = f * c' + i * tanh(Wcx x + Wcm m' + bc)
/// o = sigmoid(Wox x + Wom m' + woc * c + bo)
/// m = o * tanh(c)
/// ```
pub fn cell_forward(
    params: &LstmLayerParams,
    x: &[f64],
    prev: &LstmState,
) -> Result<(LstmState, GateRecord)> {
    params.check()?;
    let (d, u) = (params.input_size, params.hidden);
    if x.len() != d || prev.c.len() != u || prev.m.len() != u {
        return Err(LstmError::DimensionMismatch(format!(
            "x has {} entries (want {d}), state has {}/{} (want {u})",
            x.len(),
            prev.c.len(),
            prev.m.len()
        )));
    }
    let pre = |gate: usize, j: usize| -> f64 {
        let wx = &params.gate_input_weights(gate)[j * d..(j + 1) * d];
        let wm = &params.gate_recurrent_weights(gate)[j * u..(j + 1) * u];
        let a: f64 = wx.iter().zip(x).map(|(w, v)| w * v).sum();
        let b: f64 = wm.iter().zip(&prev.m).map(|(w, v)| w * v).sum();
        a + b + params.gate_bias(gate)[j]
    };
    let mut rec = GateRecord {
        input: vec![0.0; u],
        forget: vec![0.0; u],
        candidate: vec![0.0; u],
        output: vec![0.0; u],
    };
    let mut next = LstmState::zeros(u);
    for j in 0..u {
        let i = sigmoid(pre(GATE_I, j) + params.peephole(0)[j] * prev.c[j]);
        let f = sigmoid(pre(GATE_F, j) + params.peephole(1)[j] * prev.c[j]);
        let g = tanh(pre(GATE_C, j));
        let c = f * prev.c[j] + i * g;
        let o = sigmoid(pre(GATE_O, j) + params.peephole(2)[j] * c);
        next.c[j] = c;
        next.m[j] = o * tanh(c);
        rec.input[j] = i;
        rec.forget[j] = f;
        rec.candidate[j] = g;
        rec.output[j] = o;
    }
    Ok((next, rec))
}

/// A stack of one or more LSTM layers followed by a scalar linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmNetwork {
    pub layers: Vec<LstmLayerParams>,
    pub head: OutputHead,
}

impl LstmNetwork {
    /// All-zero network for the given input size and hidden sizes.
    pub fn zeros(input_size: usize, hidden: &[usize]) -> Self {
        let mut layers = Vec::with_capacity(hidden.len());
        let mut d = input_size;
        for &u in hidden {
            layers.push(LstmLayerParams::zeros(d, u));
            d = u;
        }
        Self {
            layers,
            head: OutputHead {
                weights: vec![0.0; d],
                bias: 0.0,
            },
        }
    }

    /// Uniform `[-1/sqrt(U), 1/sqrt(U)]` weights, zero biases except a forget
    /// bias of one.
    pub fn random(input_size: usize, hidden: &[usize], seed: u64) -> Self {
        let mut net = Self::zeros(input_size, hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut net.layers {
            let a = 1.0 / (layer.hidden as f64).sqrt();
            for w in layer
                .w_x
                .iter_mut()
                .chain(layer.w_m.iter_mut())
                .chain(layer.w_peep.iter_mut())
            {
                *w = rng.gen_range(-a..=a);
            }
            let u = layer.hidden;
            layer.bias[GATE_F * u..(GATE_F + 1) * u].fill(1.0);
        }
        let a = 1.0 / (net.head.weights.len() as f64).sqrt();
        for w in &mut net.head.weights {
            *w = rng.gen_range(-a..=a);
        }
        net
    }

    pub fn input_size(&self) -> usize {
        self.layers.first().map_or(0, |l| l.input_size)
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.hidden).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(LstmError::DimensionMismatch("network has no layers".into()));
        }
        let mut d = self.layers[0].input_size;
        for (k, layer) in self.layers.iter().enumerate() {
            layer.check()?;
            if layer.input_size != d {
                return Err(LstmError::DimensionMismatch(format!(
                    "layer {k} expects input {}, previous layer gives {d}",
                    layer.input_size
                )));
            }
            d = layer.hidden;
        }
        if self.head.weights.len() != d {
            return Err(LstmError::DimensionMismatch(format!(
                "head has {} weights for {d} units",
                self.head.weights.len()
            )));
        }
        Ok(())
    }

    /// Every parameter array in canonical order: per layer `w_x, w_m,
    /// w_peep, bias`, then head weights and head bias.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(4 * self.layers.len() + 2);
        for l in &self.layers {
            out.extend([&l.w_x[..], &l.w_m[..], &l.w_peep[..], &l.bias[..]]);
        }
        out.push(&self.head.weights);
        out.push(std::slice::from_ref(&self.head.bias));
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(4 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(&mut l.w_x);
            out.push(&mut l.w_m);
            out.push(&mut l.w_peep);
            out.push(&mut l.bias);
        }
        out.push(&mut self.head.weights);
        out.push(std::slice::from_mut(&mut self.head.bias));
        out
    }

    pub fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// A zero network with identical shapes, used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for s in z.param_slices_mut() {
            s.fill(0.0);
        }
        z
    }

    pub fn is_finite(&self) -> bool {
        self.param_slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Runs the network over one window (scalar input per step) from a zero
/// state and returns the head applied to the final block output.
pub fn sequence_forward(net: &LstmNetwork, window: &[f64]) -> Result<f64> {
    net.validate()?;
    if net.input_size() != 1 {
        return Err(LstmError::DimensionMismatch(format!(
            "scalar windows need input size 1, network has {}",
            net.input_size()
        )));
    }
    if window.is_empty() {
        return Err(LstmError::Empty);
    }
    let mut states: Vec<LstmState> = net
        .layers
        .iter()
        .map(|l| LstmState::zeros(l.hidden))
        .collect();
    for &x in window {
        let mut input = vec![x];
        for (layer, state) in net.layers.iter().zip(states.iter_mut()) {
            let (next, _) = cell_forward(layer, &input, state)?;
            input.clone_from(&next.m);
            *state = next;
        }
    }
    let m = &states.last().expect("validated non-empty").m;
    Ok(net.head.bias
        + net
            .head
            .weights
            .iter()
            .zip(m)
            .map(|(w, v)| w * v)
            .sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_cell_gates_are_half() {
        let p = LstmLayerParams::zeros(3, 2);
        let (s, g) = cell_forward(&p, &[0.3, -1.0, 2.0], &LstmState::zeros(2)).unwrap();
        assert_eq!(g.input, vec![0.5, 0.5]);
        assert_eq!(g.forget, vec![0.5, 0.5]);
        assert_eq!(g.output, vec![0.5, 0.5]);
        assert_eq!(s.c, vec![0.0, 0.0]);
        assert_eq!(s.m, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_cell_with_unit_state() {
        let p = LstmLayerParams::zeros(1, 1);
        let prev = LstmState {
            c: vec![1.0],
            m: vec![0.0],
        };
        let (s, _) = cell_forward(&p, &[0.7], &prev).unwrap();
        assert_eq!(s.c[0], 0.5);
        assert!((s.m[0] - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
        assert!((s.m[0] - 0.231).abs() < 1e-3);
    }

    #[test]
    fn unit_weight_cell_matches_scalar_formula() {
        let mut p = LstmLayerParams::zeros(1, 1);
        p.w_x.fill(1.0);
        p.w_m.fill(1.0);
        p.w_peep.fill(1.0);
        let (s, g) = cell_forward(&p, &[1.0], &LstmState::zeros(1)).unwrap();
        // frozen from a standalone scalar evaluation of the cell equations
        let s1 = 0.731_058_578_630_004_9;
        let c = 0.556_769_941_145_939_7;
        let o = 0.825_889_371_868_461_1;
        assert!((g.input[0] - s1).abs() < 1e-15);
        assert!((g.forget[0] - s1).abs() < 1e-15);
        assert!((s.c[0] - c).abs() < 1e-14);
        assert!((g.output[0] - o).abs() < 1e-14);
        assert!((s.m[0] - o * c.tanh()).abs() < 1e-14);
    }

    #[test]
    fn dimension_errors() {
        let p = LstmLayerParams::zeros(2, 3);
        assert!(matches!(
            cell_forward(&p, &[1.0], &LstmState::zeros(3)),
            Err(LstmError::DimensionMismatch(_))
        ));
        assert!(matches!(
            cell_forward(&p, &[1.0, 2.0], &LstmState::zeros(2)),
            Err(LstmError::DimensionMismatch(_))
        ));
        let mut net = LstmNetwork::zeros(1, &[3, 2]);
        net.head.weights.pop();
        assert!(sequence_forward(&net, &[1.0]).is_err());
    }

    #[test]
    fn zero_network_predicts_head_bias() {
        let mut net = LstmNetwork::zeros(1, &[4, 3]);
        net.head.bias = 0.3;
        for w in [[0.0, 0.0, 0.0], [1.0, -5.0, 2.0], [9.0, 9.0, 9.0]] {
            assert_eq!(sequence_forward(&net, &w).unwrap(), 0.3);
        }
        let mut single = LstmNetwork::zeros(1, &[1]);
        single.head.bias = -0.7;
        single.head.weights[0] = 2.0;
        assert_eq!(sequence_forward(&single, &[0.0, 0.0, 0.0]).unwrap(), -0.7);
    }

    #[test]
    fn zero_second_layer_masks_first() {
        let mut net = LstmNetwork::random(1, &[5, 3], 17);
        net.layers[1] = LstmLayerParams::zeros(5, 3);
        net.head.bias = 0.25;
        assert_eq!(sequence_forward(&net, &[0.1, 0.9, 0.4, 0.3]).unwrap(), 0.25);
    }

    #[test]
    fn state_decays_by_half() {
        let p = LstmLayerParams::zeros(1, 2);
        let mut s = LstmState {
            c: vec![1.5, -0.75],
            m: vec![0.0, 0.0],
        };
        let c0 = s.c.clone();
        for t in 1..=20 {
            s = cell_forward(&p, &[0.4], &s).unwrap().0;
            for (c, c0) in s.c.iter().zip(&c0) {
                assert_eq!(*c, 0.5f64.powi(t) * c0);
            }
        }
    }

    #[test]
    fn random_init_ranges() {
        let net = LstmNetwork::random(1, &[16, 9], 3);
        net.validate().unwrap();
        let a0 = 0.25;
        assert!(net.layers[0].w_m.iter().all(|w| w.abs() <= a0));
        assert_eq!(net.layers[0].gate_bias(GATE_F), &[1.0; 16][..]);
        assert!(net.layers[1].gate_bias(GATE_I).iter().all(|b| *b == 0.0));
        assert_eq!(net, LstmNetwork::random(1, &[16, 9], 3));
        assert_eq!(
            net.num_params(),
            4 * 16 * (1 + 16) + 3 * 16 + 4 * 16 + 4 * 9 * (16 + 9) + 3 * 9 + 4 * 9 + 9 + 1
        );
    }
}
