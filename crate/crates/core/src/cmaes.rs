//! CMA-ES with an ask/tell interface and box constraints.
//!
//! Strategy constants follow the standard (μ/μ_w, λ)-CMA-ES defaults from
//! Hansen's tutorial:
//!
//! ```text
//! λ     = 4 + floor(3 ln n)          μ = floor(λ / 2)
//! w_i   ∝ ln(μ + 1/2) − ln i         μ_eff = 1 / Σ w_i²
//! c_σ   = (μ_eff + 2) / (n + μ_eff + 5)
//! d_σ   = 1 + 2 max(0, sqrt((μ_eff − 1)/(n + 1)) − 1) + c_σ
//! c_c   = (4 + μ_eff/n) / (n + 4 + 2 μ_eff/n)
//! c_1   = 2 / ((n + 1.3)² + μ_eff)
//! c_μ   = min(1 − c_1, 2 (μ_eff − 2 + 1/μ_eff) / ((n + 2)² + μ_eff))
//! ```
//!
//! Candidates outside the box are clipped coordinate-wise and the clipped
//! point is what gets evaluated and recombined.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Largest tolerated condition number of `C` before the diagonal is lifted.
pub const MAX_CONDITION: f64 = 1e14;
/// Stagnation threshold on `σ · sqrt(max eig C)`.
pub const MIN_SCALE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum CmaesError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("expected {expected} evaluated candidates, got {got}")]
    WrongPopulation { expected: usize, got: usize },
    #[error("candidate {index} has missing or non-finite fitness")]
    NonFiniteFitness { index: usize },
    #[error("objective failed at {genome:?}: {message}")]
    Objective { genome: Vec<f64>, message: String },
}

pub type Result<T> = std::result::Result<T, CmaesError>;

#[derive(Debug, Clone, PartialEq)]
pub struct CmaesConfig {
    pub mean: Vec<f64>,
    pub sigma: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `None` picks `4 + floor(3 ln n)`.
    pub population: Option<usize>,
    pub max_evals: usize,
    pub target: Option<f64>,
    pub seed: u64,
}

impl CmaesConfig {
    /// Box `[lower, upper]^n` starting from its centre.
    pub fn new(n: usize, lower: f64, upper: f64, sigma: f64, seed: u64) -> Self {
        Self {
            mean: vec![0.5 * (lower + upper); n],
            sigma,
            lower: vec![lower; n],
            upper: vec![upper; n],
            population: None,
            max_evals: 1000,
            target: None,
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn lambda(&self) -> usize {
        self.population
            .unwrap_or_else(|| default_lambda(self.dim()))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        let bad = |m: String| Err(CmaesError::BadConfig(m));
        if n == 0 {
            return bad("dimension must be positive".into());
        }
        if self.lower.len() != n || self.upper.len() != n {
            return bad(format!("bounds must have length {n}"));
        }
        if !self.lower.iter().zip(&self.upper).all(|(l, u)| l < u) {
            return bad("lower < upper must hold element-wise".into());
        }
        if !self.mean.iter().all(|m| m.is_finite()) {
            return bad("mean must be finite".into());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma {} must be positive", self.sigma));
        }
        if self.lambda() < 4 {
            return bad(format!("population {} must be at least 4", self.lambda()));
        }
        Ok(())
    }
}

pub fn default_lambda(n: usize) -> usize {
    4 + (3.0 * (n as f64).ln()).floor() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub genome: Vec<f64>,
    pub fitness: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Constants {
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

#[derive(Debug, Clone)]
pub struct CmaesState {
    pub mean: Vec<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub p_sigma: Vec<f64>,
    pub p_c: Vec<f64>,
    pub weights: Vec<f64>,
    pub generation: usize,
    pub evaluations: usize,
    lambda: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    seed: u64,
    k: Constants,
    // eigendecomposition of `cov`: columns of `basis`, `sqrt_eig` = D
    basis: DMatrix<f64>,
    sqrt_eig: Vec<f64>,
}

pub fn init(cfg: &CmaesConfig) -> Result<CmaesState> {
    cfg.validate()?;
    let n = cfg.dim();
    let lambda = cfg.lambda();
    let mu = lambda / 2;
    let raw: Vec<f64> = (1..=mu)
        .map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    let nf = n as f64;
    let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
    let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
    let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
    let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
    let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
    Ok(CmaesState {
        mean: cfg.mean.clone(),
        sigma: cfg.sigma,
        cov: DMatrix::identity(n, n),
        p_sigma: vec![0.0; n],
        p_c: vec![0.0; n],
        weights,
        generation: 0,
        evaluations: 0,
        lambda,
        lower: cfg.lower.clone(),
        upper: cfg.upper.clone(),
        seed: cfg.seed,
        k: Constants {
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        },
        basis: DMatrix::identity(n, n),
        sqrt_eig: vec![1.0; n],
    })
}

impl CmaesState {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn mu(&self) -> usize {
        self.weights.len()
    }

    pub fn mu_eff(&self) -> f64 {
        self.k.mu_eff
    }

    /// Eigenvalues of `C` as of the last update.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.sqrt_eig.iter().map(|d| d * d).collect()
    }

    /// `σ · sqrt(max eig C)`, the largest sampling standard deviation.
    pub fn scale(&self) -> f64 {
        self.sigma * self.sqrt_eig.iter().cloned().fold(0.0, f64::max)
    }

    pub fn repair(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Unrepaired samples `mean + σ B D z` for the current generation. The
    /// RNG stream is keyed by (seed, generation), so repeated calls agree.
    pub fn sample_raw(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.generation as u64);
        (0..self.lambda)
            .map(|_| {
                let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let mut x = self.mean.clone();
                for (r, xr) in x.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for c in 0..n {
                        acc += self.basis[(r, c)] * self.sqrt_eig[c] * z[c];
                    }
                    *xr += self.sigma * acc;
                }
                x
            })
            .collect()
    }

    fn inv_sqrt_times(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let b = &self.basis;
        let proj: Vec<f64> = (0..n)
            .map(|c| (0..n).map(|r| b[(r, c)] * v[r]).sum::<f64>() / self.sqrt_eig[c])
            .collect();
        (0..n)
            .map(|r| (0..n).map(|c| b[(r, c)] * proj[c]).sum())
            .collect()
    }

    fn refresh_eigen(&mut self) {
        let n = self.dim();
        // exact symmetry
        for r in 0..n {
            for c in 0..r {
                let v = 0.5 * (self.cov[(r, c)] + self.cov[(c, r)]);
                self.cov[(r, c)] = v;
                self.cov[(c, r)] = v;
            }
        }
        let mut eig = SymmetricEigen::new(self.cov.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(min > 0.0) || max > MAX_CONDITION * min {
            let lift = max / MAX_CONDITION - min;
            for d in 0..n {
                self.cov[(d, d)] += lift;
            }
            eig = SymmetricEigen::new(self.cov.clone());
        }
        self.sqrt_eig = eig
            .eigenvalues
            .iter()
            .map(|e| e.max(f64::MIN_POSITIVE).sqrt())
            .collect();
        self.basis = eig.eigenvectors;
    }
}

/// Samples λ candidates and clips them into the box.
pub fn ask(state: &CmaesState) -> Vec<Candidate> {
    state
        .sample_raw()
        .into_iter()
        .map(|mut genome| {
            state.repair(&mut genome);
            Candidate {
                genome,
                fitness: None,
            }
        })
        .collect()
}

/// Ranks the evaluated population (minimization) and updates mean, paths,
/// step size and covariance.
pub fn tell(state: &mut CmaesState, candidates: &[Candidate]) -> Result<()> {
    let n = state.dim();
    if candidates.len() != state.lambda {
        return Err(CmaesError::WrongPopulation {
            expected: state.lambda,
            got: candidates.len(),
        });
    }
    let mut fit = Vec::with_capacity(candidates.len());
    for (index, c) in candidates.iter().enumerate() {
        match c.fitness {
            Some(f) if f.is_finite() && c.genome.len() == n => fit.push(f),
            _ => return Err(CmaesError::NonFiniteFitness { index }),
        }
    }
    let mut order: Vec<usize> = (0..fit.len()).collect();
    order.sort_by(|&a, &b| fit[a].total_cmp(&fit[b]));

    let k = state.k;
    let old_mean = state.mean.clone();
    let ys: Vec<Vec<f64>> = order[..state.mu()]
        .iter()
        .map(|&i| {
            candidates[i]
                .genome
                .iter()
                .zip(&old_mean)
                .map(|(x, m)| (x - m) / state.sigma)
                .collect()
        })
        .collect();
    let mut y_w = vec![0.0; n];
    for (w, y) in state.weights.iter().zip(&ys) {
        for d in 0..n {
            y_w[d] += w * y[d];
        }
    }
    for d in 0..n {
        state.mean[d] = old_mean[d] + state.sigma * y_w[d];
    }

    let cs = (k.c_sigma * (2.0 - k.c_sigma) * k.mu_eff).sqrt();
    let white = state.inv_sqrt_times(&y_w);
    for d in 0..n {
        state.p_sigma[d] = (1.0 - k.c_sigma) * state.p_sigma[d] + cs * white[d];
    }
    let ps_norm = state.p_sigma.iter().map(|v| v * v).sum::<f64>().sqrt();
    let gens = (state.generation + 1) as i32;
    let h_sigma = ps_norm / (1.0 - (1.0 - k.c_sigma).powi(2 * gens)).sqrt()
        < (1.4 + 2.0 / (n as f64 + 1.0)) * k.chi_n;
    let h = if h_sigma { 1.0 } else { 0.0 };
    let cc = (k.c_c * (2.0 - k.c_c) * k.mu_eff).sqrt();
    for d in 0..n {
        state.p_c[d] = (1.0 - k.c_c) * state.p_c[d] + h * cc * y_w[d];
    }

    let decay = 1.0 - k.c_1 - k.c_mu + (1.0 - h) * k.c_1 * k.c_c * (2.0 - k.c_c);
    let rank_one = DVector::from_column_slice(&state.p_c);
    let mut cov = state.cov.scale(decay);
    cov.ger(k.c_1, &rank_one, &rank_one, 1.0);
    for (w, y) in state.weights.iter().zip(&ys) {
        let y = DVector::from_column_slice(y);
        cov.ger(k.c_mu * w, &y, &y, 1.0);
    }
    state.cov = cov;

    let exponent = (k.c_sigma / k.d_sigma) * (ps_norm / k.chi_n - 1.0);
    state.sigma *= exponent.min(1.0).exp();

    state.generation += 1;
    state.evaluations += candidates.len();
    state.refresh_eigen();
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxEvaluations,
    TargetReached,
    Stagnation,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MaxEvaluations => "max-evaluations",
            Self::TargetReached => "target-reached",
            Self::Stagnation => "stagnation",
        })
    }
}

/// One trace line per generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub evaluations: usize,
    pub sigma: f64,
    pub best: f64,
    pub median: f64,
    pub mean: Vec<f64>,
}

impl GenerationRecord {
    pub const TSV_HEADER: &'static str = "generation\tevaluations\tsigma\tbest\tmedian\tmean";

    pub fn tsv_line(&self) -> String {
        let mean: Vec<String> = self.mean.iter().map(|v| format!("{v:?}")).collect();
        format!(
            "{}\t{}\t{:?}\t{:?}\t{:?}\t{}",
            self.generation,
            self.evaluations,
            self.sigma,
            self.best,
            self.median,
            mean.join(",")
        )
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub best_genome: Vec<f64>,
    pub best_fitness: f64,
    pub evaluations: usize,
    pub history: Vec<GenerationRecord>,
    pub termination: Termination,
}

pub fn trace_tsv(history: &[GenerationRecord]) -> String {
    let mut s = String::from(GenerationRecord::TSV_HEADER);
    s.push('\n');
    for r in history {
        s.push_str(&r.tsv_line());
        s.push('\n');
    }
    s
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Runs ask/tell until the evaluation budget, the target fitness, or
/// stagnation. The last generation is truncated so that no more than
/// `max_evals` evaluations happen; a truncated generation is not told.
pub fn try_minimize<F, E>(cfg: &CmaesConfig, mut objective: F) -> Result<MinimizeOutcome>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, E>,
    E: fmt::Display,
{
    let mut state = init(cfg)?;
    if cfg.max_evals == 0 {
        return Err(CmaesError::BadConfig("evaluation budget is zero".into()));
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut history = Vec::new();
    let mut used = 0;
    let termination = loop {
        let mut pop = ask(&state);
        let take = pop.len().min(cfg.max_evals - used);
        for cand in pop.iter_mut().take(take) {
            let f = objective(&cand.genome).map_err(|e| CmaesError::Objective {
                genome: cand.genome.clone(),
                message: e.to_string(),
            })?;
            used += 1;
            cand.fitness = Some(f);
            if best.as_ref().map_or(true, |(_, b)| f < *b) {
                best = Some((cand.genome.clone(), f));
            }
        }
        let fits: Vec<f64> = pop.iter().take(take).filter_map(|c| c.fitness).collect();
        if take == pop.len() {
            tell(&mut state, &pop)?;
        }
        history.push(GenerationRecord {
            generation: history.len(),
            evaluations: used,
            sigma: state.sigma,
            best: best.as_ref().map(|b| b.1).unwrap_or(f64::INFINITY),
            median: median(&fits),
            mean: state.mean.clone(),
        });
        let best_f = best.as_ref().map(|b| b.1).unwrap_or(f64::INFINITY);
        if cfg.target.is_some_and(|t| best_f < t) {
            break Termination::TargetReached;
        }
        if used >= cfg.max_evals {
            break Termination::MaxEvaluations;
        }
        if state.scale() < MIN_SCALE {
            break Termination::Stagnation;
        }
    };
    let (best_genome, best_fitness) = best.expect("at least one evaluation");
    Ok(MinimizeOutcome {
        best_genome,
        best_fitness,
        evaluations: used,
        history,
        termination,
    })
}

pub fn minimize<F: FnMut(&[f64]) -> f64>(
    cfg: &CmaesConfig,
    mut objective: F,
) -> Result<MinimizeOutcome> {
    try_minimize(cfg, |x| Ok::<f64, std::convert::Infallible>(objective(x)))
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_cfg(n: usize, seed: u64) -> CmaesConfig {
        let mut c = CmaesConfig::new(n, -5.0, 5.0, 2.0, seed);
        c.mean = vec![3.0; n];
        c.max_evals = 50_000;
        c.target = Some(1e-10);
        c
    }

    #[test]
    fn weights_and_defaults() {
        let mut cfg = CmaesConfig::new(2, 0.0, 1.0, 0.25, 0);
        cfg.population = Some(12);
        let s = init(&cfg).unwrap();
        assert_eq!(s.mu(), 6);
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s.weights.iter().all(|w| *w > 0.0));
        assert!(s.weights.windows(2).all(|w| w[0] > w[1]));
        assert!(s.eigenvalues().iter().all(|e| *e == 1.0));
        assert_eq!(default_lambda(10), 10);
        assert_eq!(CmaesConfig::new(10, 0.0, 1.0, 1.0, 0).lambda(), 10);
    }

    #[test]
    fn bad_configs() {
        let mut c = CmaesConfig::new(3, 0.0, 1.0, 0.5, 0);
        c.sigma = 0.0;
        assert!(init(&c).is_err());
        let mut c = CmaesConfig::new(3, 0.0, 1.0, 0.5, 0);
        c.population = Some(3);
        assert!(init(&c).is_err());
        let mut c = CmaesConfig::new(3, 0.0, 1.0, 0.5, 0);
        c.upper[1] = 0.0;
        assert!(init(&c).is_err());
    }

    #[test]
    fn ask_is_deterministic_and_bounded() {
        let cfg = CmaesConfig::new(4, -1.0, 1.0, 3.0, 9);
        let s = init(&cfg).unwrap();
        let a = ask(&s);
        assert_eq!(a, ask(&init(&cfg).unwrap()));
        assert_eq!(a, ask(&s));
        for c in &a {
            assert!(c.genome.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn tiny_sigma_samples_the_mean() {
        let mut cfg = CmaesConfig::new(3, -1.0, 1.0, 1e-300, 1);
        cfg.mean = vec![0.1, -0.2, 0.3];
        let s = init(&cfg).unwrap();
        for c in ask(&s) {
            assert_eq!(c.genome, cfg.mean);
        }
    }

    #[test]
    fn sample_mean_statistics() {
        let mut cfg = CmaesConfig::new(3, -1e6, 1e6, 1.0, 2);
        cfg.population = Some(10_000);
        cfg.mean = vec![1.0, -2.0, 0.5];
        let s = init(&cfg).unwrap();
        let raw = s.sample_raw();
        for d in 0..3 {
            let m = raw.iter().map(|x| x[d]).sum::<f64>() / raw.len() as f64;
            assert!((m - cfg.mean[d]).abs() < 3.0 / 100.0, "{d}: {m}");
        }
    }

    #[test]
    fn one_generation_moves_towards_optimum() {
        let mut failures = 0;
        for seed in 0..20 {
            let mut cfg = CmaesConfig::new(2, -10.0, 10.0, 1.0, seed);
            cfg.mean = vec![5.0, 5.0];
            let mut s = init(&cfg).unwrap();
            let mut pop = ask(&s);
            for c in &mut pop {
                c.fitness = Some(sphere(&c.genome));
            }
            tell(&mut s, &pop).unwrap();
            if sphere(&s.mean) >= 50.0 {
                failures += 1;
            }
            assert_eq!(s.evaluations, pop.len());
        }
        assert!(failures <= 2, "{failures}");
    }

    #[test]
    fn tell_rejects_bad_populations() {
        let cfg = CmaesConfig::new(2, -1.0, 1.0, 0.5, 0);
        let mut s = init(&cfg).unwrap();
        let mut pop = ask(&s);
        assert!(matches!(
            tell(&mut s, &pop),
            Err(CmaesError::NonFiniteFitness { index: 0 })
        ));
        for c in &mut pop {
            c.fitness = Some(1.0);
        }
        pop[2].fitness = Some(f64::NAN);
        assert!(matches!(
            tell(&mut s, &pop),
            Err(CmaesError::NonFiniteFitness { index: 2 })
        ));
        assert!(matches!(
            tell(&mut s, &pop[1..]),
            Err(CmaesError::WrongPopulation { .. })
        ));
    }

    #[test]
    fn all_ties_give_weighted_mean() {
        let cfg = CmaesConfig::new(2, -1.0, 1.0, 0.3, 4);
        let mut s = init(&cfg).unwrap();
        let mut pop = ask(&s);
        for c in &mut pop {
            c.fitness = Some(7.0);
        }
        let w = s.weights.clone();
        tell(&mut s, &pop).unwrap();
        // stable sort keeps candidate order on ties
        for d in 0..2 {
            let m: f64 = w.iter().zip(&pop).map(|(w, c)| w * c.genome[d]).sum();
            assert!((s.mean[d] - m).abs() < 1e-15);
        }
    }

    #[test]
    fn covariance_stays_symmetric_positive_definite() {
        let mut cfg = CmaesConfig::new(5, -5.0, 5.0, 0.5, 3);
        cfg.mean = vec![0.0; 5];
        let mut s = init(&cfg).unwrap();
        for _ in 0..100 {
            let mut pop = ask(&s);
            for c in &mut pop {
                c.fitness = Some(rosenbrock(&c.genome));
            }
            tell(&mut s, &pop).unwrap();
            assert_eq!(s.cov, s.cov.transpose());
            assert!(s.eigenvalues().iter().all(|e| *e > 0.0));
        }
    }

    #[test]
    fn sphere_converges() {
        let out = minimize(&sphere_cfg(10, 1), sphere).unwrap();
        assert!(out.best_fitness < 1e-10, "{}", out.best_fitness);
        assert_eq!(out.termination, Termination::TargetReached);
        assert!(out.history.windows(2).all(|w| w[1].best <= w[0].best));
    }

    #[test]
    fn constant_shift_invariance() {
        for seed in 0..5 {
            let mut cfg = sphere_cfg(3, seed);
            cfg.max_evals = 300;
            cfg.target = None;
            let mut a = Vec::new();
            let mut b = Vec::new();
            minimize(&cfg, |x| {
                a.push(x.to_vec());
                sphere(x)
            })
            .unwrap();
            minimize(&cfg, |x| {
                b.push(x.to_vec());
                sphere(x) + 1234.5
            })
            .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn constant_objective_is_fine() {
        let mut cfg = CmaesConfig::new(3, 0.0, 1.0, 0.2, 0);
        cfg.max_evals = 100;
        let out = minimize(&cfg, |_| 4.0).unwrap();
        assert_eq!(out.best_fitness, 4.0);
        assert_eq!(out.evaluations, 100);
    }

    #[test]
    fn budget_is_exact_and_errors_carry_genome() {
        let mut cfg = CmaesConfig::new(2, 0.0, 1.0, 0.2, 0);
        cfg.max_evals = 13;
        let mut count = 0;
        let out = minimize(&cfg, |x| {
            count += 1;
            sphere(x)
        })
        .unwrap();
        assert_eq!((count, out.evaluations), (13, 13));
        assert_eq!(out.termination, Termination::MaxEvaluations);
        let err = try_minimize(&cfg, |_| Err::<f64, _>("boom")).unwrap_err();
        assert!(matches!(err, CmaesError::Objective { ref message, .. } if message == "boom"));
    }

    #[test]
    fn trace_has_one_line_per_generation() {
        let mut cfg = CmaesConfig::new(2, -1.0, 1.0, 0.3, 0);
        cfg.max_evals = 60;
        let out = minimize(&cfg, sphere).unwrap();
        let tsv = trace_tsv(&out.history);
        assert_eq!(tsv.lines().count(), out.history.len() + 1);
        assert_eq!(tsv.lines().nth(1).unwrap().split('\t').count(), 6);
    }
}
