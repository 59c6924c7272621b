#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windcast::experiment::{ExperimentConfig, SynthConfig};
use windcast::lstm::{backward_bptt, loss_mse, predict_batch, LstmNetwork};

/// Brute-force metric values: (mse, rmse, mae, mape %, r).
pub fn oracle_metrics(p: &[f64], o: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = p.len() as f64;
    let mut se = 0.0;
    let mut ae = 0.0;
    let mut ape = 0.0;
    for i in 0..p.len() {
        let d = p[i] - o[i];
        se += d * d;
        ae += d.abs();
        ape += (d / o[i]).abs();
    }
    // raw-moment form of the correlation
    let (sx, sy): (f64, f64) = (p.iter().sum(), o.iter().sum());
    let sxy: f64 = p.iter().zip(o).map(|(a, b)| a * b).sum();
    let sxx: f64 = p.iter().map(|a| a * a).sum();
    let syy: f64 = o.iter().map(|b| b * b).sum();
    let r = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
    (se / n, (se / n).sqrt(), ae / n, 100.0 * ape / n, r)
}

/// Random prediction/observation pair with observations well away from zero.
pub fn random_pair(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let len = rng.gen_range(10..=500);
    let o: Vec<f64> = (0..len).map(|_| rng.gen_range(0.5..25.0)).collect();
    let p: Vec<f64> = o.iter().map(|v| v + rng.gen_range(-3.0..3.0)).collect();
    (p, o)
}

/// Mean ranks and chi-square by counting: rank = 1 + #better + #ties / 2.
pub fn oracle_friedman(table: &[Vec<f64>], lower_is_better: bool) -> (Vec<f64>, f64) {
    let k = table.len();
    let n = table[0].len();
    let mut sums = vec![0.0; k];
    for run in 0..n {
        for m in 0..k {
            let v = table[m][run];
            let mut r = 1.0;
            for other in 0..k {
                if other == m {
                    continue;
                }
                let w = table[other][run];
                let better = if lower_is_better { w < v } else { w > v };
                if better {
                    r += 1.0;
                } else if w == v {
                    r += 0.5;
                }
            }
            sums[m] += r;
        }
    }
    let (kf, nf) = (k as f64, n as f64);
    let chi = 12.0 / (nf * kf * (kf + 1.0)) * sums.iter().map(|s| s * s).sum::<f64>()
        - 3.0 * nf * (kf + 1.0);
    (sums.iter().map(|s| s / nf).collect(), chi)
}

pub fn batch(seed: u64, count: usize, steps: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = (0..count)
        .map(|_| (0..steps).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let t = (0..count).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (w, t)
}

/// Below this magnitude a central difference with h = 1e-5 is dominated by
/// rounding in the loss (about 1e-16 / h), so errors are scaled by it instead.
pub const GRAD_FLOOR: f64 = 1e-6;

/// Worst relative error between the analytic gradient and central
/// differences over every parameter, scaled by `max(|a|, |n|, GRAD_FLOOR)`.
pub fn gradient_check(
    net: &LstmNetwork,
    windows: &[Vec<f64>],
    targets: &[f64],
    h: f64,
) -> (f64, usize) {
    let analytic = backward_bptt(net, windows, targets).unwrap().grads;
    let a: Vec<f64> = analytic
        .param_slices()
        .into_iter()
        .flatten()
        .copied()
        .collect();
    let loss = |n: &LstmNetwork| loss_mse(&predict_batch(n, windows).unwrap(), targets).unwrap();
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    let mut k = 0;
    let lens: Vec<usize> = net.param_slices().iter().map(|s| s.len()).collect();
    for (s, &len) in lens.iter().enumerate() {
        for j in 0..len {
            let orig = probe.param_slices_mut()[s][j];
            probe.param_slices_mut()[s][j] = orig + h;
            let up = loss(&probe);
            probe.param_slices_mut()[s][j] = orig - h;
            let down = loss(&probe);
            probe.param_slices_mut()[s][j] = orig;
            let num = (up - down) / (2.0 * h);
            let rel = (a[k] - num).abs() / a[k].abs().max(num.abs()).max(GRAD_FLOOR);
            worst = worst.max(rel);
            k += 1;
        }
    }
    (worst, k)
}

/// Small synthetic experiment that finishes in seconds.
pub fn tiny_config(out: &std::path::Path, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = seed;
    cfg.out = out.to_path_buf();
    cfg.repetitions = 2;
    cfg.data.block = 72;
    cfg.data.synth = Some(SynthConfig {
        n: 2000,
        ..SynthConfig::default()
    });
    cfg.model.hidden = vec![6];
    cfg.model.epochs = 3;
    cfg.model.batch_size = 64;
    cfg.fitness.epochs = 2;
    cfg.fitness.max_train_samples = Some(150);
    cfg.fitness.max_val_samples = Some(80);
    cfg.cmaes.budget = 8;
    cfg.cmaes.population = 4;
    cfg.grid.learning_rates = vec![1e-3, 1e-2];
    cfg.grid.batch_sizes = vec![32, 64];
    cfg.grid.units = vec![30, 30];
    cfg
}
