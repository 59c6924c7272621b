//! Batched forward pass and backpropagation through time.
//!
//! Activations for a batch of `B` windows of length `T` are laid out
//! time-major: the block for step `t` is a row-major `B x 4U` (gates) or
//! `B x U` (states) matrix. State buffers carry one extra leading block for
//! the zero initial state.

use super::activ::{sigmoid_in_place, tanh_in_place};
use super::network::{LstmLayerParams, LstmNetwork, GATES};
use super::{LstmError, Result};

/// Mean squared error between equal-length, non-empty sequences.
pub fn loss_mse(pred: &[f64], targets: &[f64]) -> Result<f64> {
    if pred.len() != targets.len() {
        return Err(LstmError::LengthMismatch(pred.len(), targets.len()));
    }
    if pred.is_empty() {
        return Err(LstmError::Empty);
    }
    Ok(pred
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64)
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
    rsc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    debug_assert!(k == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    debug_assert!(c.len() > (m - 1) * rsc + (n - 1));
    // SAFETY: the asserted extents keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

/// Strided view of a layer's input sequence.
#[derive(Clone, Copy)]
struct InputView<'a> {
    data: &'a [f64],
    offset0: usize,
    t_stride: usize,
    row_stride: usize,
    col_stride: usize,
}

impl InputView<'_> {
    fn at(&self, t: usize) -> &[f64] {
        &self.data[self.offset0 + t * self.t_stride..]
    }
}

struct LayerCache {
    /// post-activation gates per step, `T x B x 4U`
    acts: Vec<f64>,
    /// cell states, `(T+1) x B x U`
    c: Vec<f64>,
    /// block outputs, `(T+1) x B x U`
    m: Vec<f64>,
    /// `tanh(c_t)`, `T x B x U`
    tanh_c: Vec<f64>,
}

fn layer_forward(p: &LstmLayerParams, x: InputView<'_>, batch: usize, steps: usize) -> LayerCache {
    let u = p.hidden;
    let g4 = GATES * u;
    let bu = batch * u;
    let mut cache = LayerCache {
        acts: vec![0.0; steps * batch * g4],
        c: vec![0.0; (steps + 1) * bu],
        m: vec![0.0; (steps + 1) * bu],
        tanh_c: vec![0.0; steps * bu],
    };
    input_projection(p, x, batch, steps, &mut cache.acts);
    let (wic, rest) = p.w_peep.split_at(u);
    let (wfc, woc) = rest.split_at(u);
    for t in 0..steps {
        let z = &mut cache.acts[t * batch * g4..(t + 1) * batch * g4];
        let (m_prev, m_next) = cache.m.split_at_mut((t + 1) * bu);
        // m_0 is zero
        if t > 0 {
            gemm(
                batch,
                u,
                g4,
                &m_prev[t * bu..],
                u,
                1,
                &p.w_m,
                1,
                u,
                1.0,
                z,
                g4,
            );
        }

        let (c_prev, c_next) = cache.c.split_at_mut((t + 1) * bu);
        let c_prev = &c_prev[t * bu..];
        let tanh_c = &mut cache.tanh_c[t * bu..(t + 1) * bu];
        for b in 0..batch {
            let row = &mut z[b * g4..(b + 1) * g4];
            let (zi, rest) = row.split_at_mut(u);
            let (zf, rest) = rest.split_at_mut(u);
            let (zg, zo) = rest.split_at_mut(u);
            let cp = &c_prev[b * u..(b + 1) * u];
            let cn = &mut c_next[b * u..(b + 1) * u];
            let tc = &mut tanh_c[b * u..(b + 1) * u];
            let mn = &mut m_next[b * u..(b + 1) * u];
            for j in 0..u {
                zi[j] += wic[j] * cp[j];
                zf[j] += wfc[j] * cp[j];
            }
            sigmoid_in_place(zi);
            sigmoid_in_place(zf);
            tanh_in_place(zg);
            for j in 0..u {
                let c = zf[j] * cp[j] + zi[j] * zg[j];
                cn[j] = c;
                zo[j] += woc[j] * c;
                tc[j] = c;
            }
            sigmoid_in_place(zo);
            tanh_in_place(tc);
            for j in 0..u {
                mn[j] = zo[j] * tc[j];
            }
        }
    }
    cache
}

/// Input rows `(t, b)` form one `TB x D` matrix (true for every layer fed by
/// another layer).
fn contiguous(x: &InputView<'_>, batch: usize) -> bool {
    x.col_stride == 1 && x.t_stride == batch * x.row_stride
}

/// `z[t, b] = bias + W_x x[t, b]` for every step at once.
fn input_projection(
    p: &LstmLayerParams,
    x: InputView<'_>,
    batch: usize,
    steps: usize,
    acts: &mut [f64],
) {
    let (d, g4) = (p.input_size, GATES * p.hidden);
    if d == 1 {
        for t in 0..steps {
            let xt = x.at(t);
            for b in 0..batch {
                let xv = xt[b * x.row_stride];
                let row = &mut acts[(t * batch + b) * g4..(t * batch + b + 1) * g4];
                for ((z, bias), w) in row.iter_mut().zip(&p.bias).zip(&p.w_x) {
                    *z = bias + xv * w;
                }
            }
        }
        return;
    }
    for row in acts.chunks_exact_mut(g4) {
        row.copy_from_slice(&p.bias);
    }
    if contiguous(&x, batch) {
        gemm(
            steps * batch,
            d,
            g4,
            x.at(0),
            x.row_stride,
            1,
            &p.w_x,
            1,
            d,
            1.0,
            acts,
            g4,
        );
    } else {
        for t in 0..steps {
            let z = &mut acts[t * batch * g4..(t + 1) * batch * g4];
            gemm(
                batch,
                d,
                g4,
                x.at(t),
                x.row_stride,
                x.col_stride,
                &p.w_x,
                1,
                d,
                1.0,
                z,
                g4,
            );
        }
    }
}

fn pack_windows<W: AsRef<[f64]>>(windows: &[W]) -> Result<(Vec<f64>, usize)> {
    let steps = windows
        .first()
        .map(|w| w.as_ref().len())
        .ok_or(LstmError::Empty)?;
    if steps == 0 {
        return Err(LstmError::Empty);
    }
    let mut x = Vec::with_capacity(windows.len() * steps);
    for w in windows {
        let w = w.as_ref();
        if w.len() != steps {
            return Err(LstmError::DimensionMismatch(format!(
                "ragged batch: window of length {} among length {steps}",
                w.len()
            )));
        }
        x.extend_from_slice(w);
    }
    Ok((x, steps))
}

fn forward_all(
    net: &LstmNetwork,
    x: &[f64],
    batch: usize,
    steps: usize,
) -> (Vec<LayerCache>, Vec<f64>) {
    let mut caches: Vec<LayerCache> = Vec::with_capacity(net.layers.len());
    for (k, layer) in net.layers.iter().enumerate() {
        let view = match caches.last() {
            None => InputView {
                data: x,
                offset0: 0,
                t_stride: 1,
                row_stride: steps,
                col_stride: 1,
            },
            Some(prev) => {
                let bu = batch * net.layers[k - 1].hidden;
                InputView {
                    data: &prev.m,
                    offset0: bu,
                    t_stride: bu,
                    row_stride: net.layers[k - 1].hidden,
                    col_stride: 1,
                }
            }
        };
        let cache = layer_forward(layer, view, batch, steps);
        caches.push(cache);
    }
    let u = net.head.weights.len();
    let top = caches.last().expect("at least one layer");
    let last = &top.m[steps * batch * u..];
    let preds = last
        .chunks_exact(u)
        .map(|m| {
            net.head.bias
                + m.iter()
                    .zip(&net.head.weights)
                    .map(|(a, w)| a * w)
                    .sum::<f64>()
        })
        .collect();
    (caches, preds)
}

fn check_scalar_input(net: &LstmNetwork) -> Result<()> {
    net.validate()?;
    if net.input_size() != 1 {
        return Err(LstmError::DimensionMismatch(format!(
            "scalar windows need input size 1, network has {}",
            net.input_size()
        )));
    }
    Ok(())
}

/// Predicts every window, processing `chunk` windows per batched pass.
pub fn predict_batch<W: AsRef<[f64]>>(net: &LstmNetwork, windows: &[W]) -> Result<Vec<f64>> {
    const CHUNK: usize = 512;
    check_scalar_input(net)?;
    let mut out = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(CHUNK) {
        let (x, steps) = pack_windows(chunk)?;
        let (_, preds) = forward_all(net, &x, chunk.len(), steps);
        out.extend(preds);
    }
    Ok(out)
}

/// Loss and parameter gradients for one minibatch.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub loss: f64,
    pub predictions: Vec<f64>,
    pub grads: LstmNetwork,
}

/// Gradient of the batch-mean squared error with respect to every network
/// parameter, including the peephole path through the current cell state
/// into the output gate.
pub fn backward_bptt<W: AsRef<[f64]>>(
    net: &LstmNetwork,
    windows: &[W],
    targets: &[f64],
) -> Result<BatchGradients> {
    check_scalar_input(net)?;
    if windows.len() != targets.len() {
        return Err(LstmError::LengthMismatch(windows.len(), targets.len()));
    }
    let (x, steps) = pack_windows(windows)?;
    let batch = windows.len();
    let (caches, preds) = forward_all(net, &x, batch, steps);
    let loss = loss_mse(&preds, targets)?;

    let mut grads = net.zeros_like();
    let dy: Vec<f64> = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| 2.0 * (p - t) / batch as f64)
        .collect();

    let top_u = net.head.weights.len();
    let top_m = &caches.last().expect("validated").m[steps * batch * top_u..];
    for (b, &g) in dy.iter().enumerate() {
        grads.head.bias += g;
        for (gw, m) in grads
            .head
            .weights
            .iter_mut()
            .zip(&top_m[b * top_u..(b + 1) * top_u])
        {
            *gw += g * m;
        }
    }

    // gradient flowing into each layer's block outputs from above, T x B x U
    let mut dm_in = vec![0.0; steps * batch * top_u];
    let last = &mut dm_in[(steps - 1) * batch * top_u..];
    for (b, &g) in dy.iter().enumerate() {
        for (d, w) in last[b * top_u..(b + 1) * top_u]
            .iter_mut()
            .zip(&net.head.weights)
        {
            *d = g * w;
        }
    }

    for k in (0..net.layers.len()).rev() {
        let p = &net.layers[k];
        let cache = &caches[k];
        let (d, u) = (p.input_size, p.hidden);
        let g4 = GATES * u;
        let bu = batch * u;
        let input = if k == 0 {
            InputView {
                data: &x,
                offset0: 0,
                t_stride: 1,
                row_stride: steps,
                col_stride: 1,
            }
        } else {
            let bu_prev = batch * d;
            InputView {
                data: &caches[k - 1].m,
                offset0: bu_prev,
                t_stride: bu_prev,
                row_stride: d,
                col_stride: 1,
            }
        };
        let gl = &mut grads.layers[k];
        let (wic, rest) = p.w_peep.split_at(u);
        let (wfc, woc) = rest.split_at(u);

        let mut dm_rec = vec![0.0; bu];
        let mut dc_next = vec![0.0; bu];
        let mut dz_all = vec![0.0; steps * batch * g4];
        for t in (0..steps).rev() {
            let acts = &cache.acts[t * batch * g4..(t + 1) * batch * g4];
            let c_prev = &cache.c[t * bu..(t + 1) * bu];
            let c_cur = &cache.c[(t + 1) * bu..(t + 2) * bu];
            let tanh_c = &cache.tanh_c[t * bu..(t + 1) * bu];
            let dm_t = &dm_in[t * bu..(t + 1) * bu];
            let dz = &mut dz_all[t * batch * g4..(t + 1) * batch * g4];
            {
                let (gic, rest) = gl.w_peep.split_at_mut(u);
                let (gfc, goc) = rest.split_at_mut(u);
                for b in 0..batch {
                    let a = &acts[b * g4..(b + 1) * g4];
                    let row = &mut dz[b * g4..(b + 1) * g4];
                    for j in 0..u {
                        let idx = b * u + j;
                        let (i, f, g, o) = (a[j], a[u + j], a[2 * u + j], a[3 * u + j]);
                        let tc = tanh_c[idx];
                        let cp = c_prev[idx];
                        let dm = dm_t[idx] + dm_rec[idx];
                        let dzo = dm * tc * o * (1.0 - o);
                        let dc = dc_next[idx] + dm * o * (1.0 - tc * tc) + dzo * woc[j];
                        let dzi = dc * g * i * (1.0 - i);
                        let dzf = dc * cp * f * (1.0 - f);
                        let dzg = dc * i * (1.0 - g * g);
                        dc_next[idx] = dc * f + dzi * wic[j] + dzf * wfc[j];
                        gic[j] += dzi * cp;
                        gfc[j] += dzf * cp;
                        goc[j] += dzo * c_cur[idx];
                        row[j] = dzi;
                        row[u + j] = dzf;
                        row[2 * u + j] = dzg;
                        row[3 * u + j] = dzo;
                    }
                }
            }
            // recurrent gradient into m_{t-1}; nothing flows past m_0
            if t > 0 {
                gemm(batch, g4, u, dz, g4, 1, &p.w_m, u, 1, 0.0, &mut dm_rec, u);
            }
        }

        for row in dz_all.chunks_exact(g4) {
            for (gb, v) in gl.bias.iter_mut().zip(row) {
                *gb += v;
            }
        }
        // dW_m += sum_t dZ_t^T M_{t-1}, skipping the zero initial state
        let rows = (steps - 1) * batch;
        if rows > 0 {
            gemm(
                g4,
                rows,
                u,
                &dz_all[batch * g4..],
                1,
                g4,
                &cache.m[bu..],
                u,
                1,
                1.0,
                &mut gl.w_m,
                u,
            );
        }
        // dW_x += sum_t dZ_t^T X_t
        if d == 1 {
            for t in 0..steps {
                let xt = input.at(t);
                for b in 0..batch {
                    let xv = xt[b * input.row_stride];
                    let row = &dz_all[(t * batch + b) * g4..(t * batch + b + 1) * g4];
                    for (gw, v) in gl.w_x.iter_mut().zip(row) {
                        *gw += v * xv;
                    }
                }
            }
        } else if contiguous(&input, batch) {
            gemm(
                g4,
                steps * batch,
                d,
                &dz_all,
                1,
                g4,
                input.at(0),
                input.row_stride,
                1,
                1.0,
                &mut gl.w_x,
                d,
            );
        } else {
            for t in 0..steps {
                let dz = &dz_all[t * batch * g4..];
                gemm(
                    g4,
                    batch,
                    d,
                    dz,
                    1,
                    g4,
                    input.at(t),
                    input.row_stride,
                    input.col_stride,
                    1.0,
                    &mut gl.w_x,
                    d,
                );
            }
        }
        // gradient into the layer below, all steps at once
        let dx_all = if k > 0 {
            let mut dx = vec![0.0; steps * batch * d];
            gemm(
                steps * batch,
                g4,
                d,
                &dz_all,
                g4,
                1,
                &p.w_x,
                d,
                1,
                0.0,
                &mut dx,
                d,
            );
            dx
        } else {
            Vec::new()
        };
        dm_in = dx_all;
    }

    Ok(BatchGradients {
        loss,
        predictions: preds,
        grads,
    })
}
