use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fitness::{FitnessConfig, Objective, Trial};
use super::genotype::{decode, HyperParams, GENOME_LEN};
use super::TunerError;
use crate::cmaes::{self, CmaesConfig, GenerationRecord};
use crate::derive_seed;
use crate::lstm::{LstmNetwork, OptimizerKind};

/// Environment variable capping concurrent fitness evaluations.
pub const THREADS_ENV: &str = "WINDCAST_THREADS";

/// Worker count from `WINDCAST_THREADS`, default 1. Parallel evaluations
/// compete for cores and inflate each other's measured runtimes.
pub fn worker_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub eval_index: usize,
    pub hp: HyperParams,
    /// Genome the entry was decoded from (empty for grid points).
    pub genome: Vec<f64>,
    pub rmse: f64,
    pub runtime_s: f64,
    pub penalty: f64,
    pub fitness: f64,
    pub seed: u64,
}

pub const LEDGER_HEADER: &str =
    "eval_index\tN_h\tN_n1\tN_n2\tL_R\tB_S\tOp\trmse\truntime_s\tpenalty\tfitness\tseed";

impl LedgerEntry {
    pub fn tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{:?}\t{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}\t{}",
            self.eval_index,
            self.hp.hidden_layers,
            self.hp.units[0],
            self.hp.units[1],
            self.hp.learning_rate,
            self.hp.batch_size,
            self.hp.optimizer,
            self.rmse,
            self.runtime_s,
            self.penalty,
            self.fitness,
            self.seed
        )
    }

    pub fn parse_tsv(line: &str) -> Result<Self, TunerError> {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 12 {
            return Err(TunerError::Parse(format!(
                "expected 12 fields, found {}",
                f.len()
            )));
        }
        fn num<T: std::str::FromStr>(s: &str, name: &str) -> Result<T, TunerError> {
            s.trim()
                .parse()
                .map_err(|_| TunerError::Parse(format!("bad {name} `{s}`")))
        }
        let optimizer: OptimizerKind = f[6].parse().map_err(TunerError::Parse)?;
        Ok(Self {
            eval_index: num(f[0], "eval_index")?,
            hp: HyperParams {
                hidden_layers: num(f[1], "N_h")?,
                units: [num(f[2], "N_n1")?, num(f[3], "N_n2")?],
                learning_rate: num(f[4], "L_R")?,
                batch_size: num(f[5], "B_S")?,
                optimizer,
            },
            genome: Vec::new(),
            rmse: num(f[7], "rmse")?,
            runtime_s: num(f[8], "runtime_s")?,
            penalty: num(f[9], "penalty")?,
            fitness: num(f[10], "fitness")?,
            seed: num(f[11], "seed")?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub method: String,
    pub entries: Vec<LedgerEntry>,
    pub best_index: usize,
    /// Trained parameters of the best entry, when the objective returns them.
    pub best_network: Option<LstmNetwork>,
    pub trace: Vec<GenerationRecord>,
    pub population: usize,
}

impl TuneResult {
    pub fn best(&self) -> &LedgerEntry {
        &self.entries[self.best_index]
    }

    pub fn best_hp(&self) -> HyperParams {
        self.best().hp
    }

    pub fn best_fitness(&self) -> f64 {
        self.best().fitness
    }

    /// Entries of the last (possibly truncated) generation.
    pub fn final_generation(&self) -> &[LedgerEntry] {
        let p = self.population.max(1);
        let start = (self.entries.len() - 1) / p * p;
        &self.entries[start..]
    }

    pub fn ledger_tsv(&self) -> String {
        let mut s = String::from(LEDGER_HEADER);
        s.push('\n');
        for e in &self.entries {
            s.push_str(&e.tsv_line());
            s.push('\n');
        }
        s
    }

    pub fn write_ledger(&self, path: impl AsRef<Path>) -> Result<(), TunerError> {
        std::fs::write(path, self.ledger_tsv())?;
        Ok(())
    }

    /// Best configuration as `key=value` lines.
    pub fn summary_kv(&self) -> String {
        let b = self.best();
        let mut s = String::new();
        let units: Vec<String> = b.hp.hidden_sizes().iter().map(|u| u.to_string()).collect();
        let _ = writeln!(s, "method={}", self.method);
        let _ = writeln!(s, "evaluations={}", self.entries.len());
        let _ = writeln!(s, "best_eval_index={}", b.eval_index);
        let _ = writeln!(s, "hidden_layers={}", b.hp.hidden_layers);
        let _ = writeln!(s, "units={}", units.join(","));
        let _ = writeln!(s, "learning_rate={:?}", b.hp.learning_rate);
        let _ = writeln!(s, "batch_size={}", b.hp.batch_size);
        let _ = writeln!(s, "optimizer={}", b.hp.optimizer);
        let _ = writeln!(s, "rmse={:?}", b.rmse);
        let _ = writeln!(s, "runtime_s={:?}", b.runtime_s);
        let _ = writeln!(s, "penalty={:?}", b.penalty);
        let _ = writeln!(s, "fitness={:?}", b.fitness);
        let _ = writeln!(s, "seed={}", b.seed);
        s
    }
}

pub fn read_ledger(path: impl AsRef<Path>) -> Result<Vec<LedgerEntry>, TunerError> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if n == 0 {
            if line.trim() != LEDGER_HEADER {
                return Err(TunerError::Parse("unexpected ledger header".into()));
            }
            continue;
        }
        if !line.trim().is_empty() {
            out.push(LedgerEntry::parse_tsv(&line)?);
        }
    }
    Ok(out)
}

/// CMA-ES settings for a tuning run over the unit-cube genotype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneSettings {
    pub budget: usize,
    pub population: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for TuneSettings {
    fn default() -> Self {
        Self {
            budget: 1000,
            population: 12,
            sigma: 0.25,
            seed: 0,
        }
    }
}

fn evaluate_all<O: Objective + ?Sized>(
    objective: &O,
    jobs: &[(HyperParams, u64)],
    threads: usize,
) -> Result<Vec<Trial>, TunerError> {
    if threads <= 1 || jobs.len() <= 1 {
        return jobs
            .iter()
            .map(|(hp, s)| objective.evaluate(hp, *s))
            .collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| TunerError::BadConfig(e.to_string()))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|(hp, s)| objective.evaluate(hp, *s))
            .collect()
    })
}

struct Recorder<'a> {
    fitness: &'a FitnessConfig,
    entries: Vec<LedgerEntry>,
    best: Option<(usize, Option<LstmNetwork>)>,
}

impl Recorder<'_> {
    fn push(&mut self, hp: HyperParams, genome: Vec<f64>, seed: u64, trial: Trial) -> f64 {
        let pen = super::penalty(trial.runtime_s, self.fitness.rho);
        let f = self.fitness.fitness(trial.rmse, trial.runtime_s);
        let idx = self.entries.len();
        let improves = self
            .best
            .as_ref()
            .map_or(true, |(b, _)| f < self.entries[*b].fitness);
        self.entries.push(LedgerEntry {
            eval_index: idx,
            hp,
            genome,
            rmse: trial.rmse,
            runtime_s: trial.runtime_s,
            penalty: pen,
            fitness: f,
            seed,
        });
        if improves {
            self.best = Some((idx, trial.network));
        }
        f
    }

    fn finish(self, method: &str, trace: Vec<GenerationRecord>, population: usize) -> TuneResult {
        let (best_index, best_network) = self.best.expect("non-empty ledger");
        TuneResult {
            method: method.to_string(),
            entries: self.entries,
            best_index,
            best_network,
            trace,
            population,
        }
    }
}

/// CMA-ES over the genotype, one ledger entry per fitness evaluation.
///
/// Evaluation `k` trains with seed `derive_seed(settings.seed, k)`. A
/// population is evaluated (optionally in parallel) and told in candidate
/// order, so results do not depend on completion order.
pub fn cmaes_tune<O: Objective + ?Sized>(
    objective: &O,
    fitness: &FitnessConfig,
    settings: &TuneSettings,
) -> Result<TuneResult, TunerError> {
    fitness.validate()?;
    if settings.budget == 0 {
        return Err(TunerError::EmptyBudget);
    }
    let mut cfg = CmaesConfig::new(
        GENOME_LEN,
        0.0,
        1.0,
        settings.sigma,
        derive_seed(settings.seed, u64::MAX),
    );
    cfg.population = Some(settings.population);
    cfg.max_evals = settings.budget;
    let mut state = cmaes::init(&cfg)?;
    let threads = worker_threads();
    let mut rec = Recorder {
        fitness,
        entries: Vec::new(),
        best: None,
    };
    let mut trace = Vec::new();
    while rec.entries.len() < settings.budget {
        let mut pop = cmaes::ask(&state);
        let take = pop.len().min(settings.budget - rec.entries.len());
        let base = rec.entries.len();
        let jobs: Vec<(HyperParams, u64)> = pop[..take]
            .iter()
            .enumerate()
            .map(|(k, c)| {
                Ok((
                    decode(&c.genome)?,
                    derive_seed(settings.seed, (base + k) as u64),
                ))
            })
            .collect::<Result<_, TunerError>>()?;
        let trials = evaluate_all(objective, &jobs, threads)?;
        let mut fits = Vec::with_capacity(take);
        for ((cand, (hp, seed)), trial) in pop.iter_mut().zip(jobs).zip(trials) {
            let f = rec.push(hp, cand.genome.clone(), seed, trial);
            cand.fitness = Some(f);
            fits.push(f);
        }
        if take == pop.len() {
            cmaes::tell(&mut state, &pop)?;
        }
        fits.sort_by(f64::total_cmp);
        trace.push(GenerationRecord {
            generation: trace.len(),
            evaluations: rec.entries.len(),
            sigma: state.sigma,
            best: rec
                .best
                .as_ref()
                .map(|(b, _)| rec.entries[*b].fitness)
                .unwrap_or(f64::INFINITY),
            median: fits[fits.len() / 2],
            mean: state.mean.clone(),
        });
    }
    Ok(rec.finish("cmaes", trace, settings.population))
}

/// Learning-rate by batch-size grid with the remaining hyperparameters fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub units: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            learning_rates: vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
            batch_sizes: vec![8, 32, 128, 512, 1024],
            units: vec![125, 100],
            optimizer: OptimizerKind::Adam,
            seed: 0,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<HyperParams>, TunerError> {
        if self.learning_rates.is_empty() || self.batch_sizes.is_empty() {
            return Err(TunerError::EmptyGrid);
        }
        if self.units.is_empty() || self.units.len() > 2 {
            return Err(TunerError::BadConfig(
                "grid needs one or two layer sizes".into(),
            ));
        }
        let units = [self.units[0], *self.units.last().expect("non-empty")];
        let mut pts = Vec::new();
        for &lr in &self.learning_rates {
            for &bs in &self.batch_sizes {
                let hp = HyperParams {
                    hidden_layers: self.units.len(),
                    units,
                    learning_rate: lr,
                    batch_size: bs,
                    optimizer: self.optimizer,
                };
                if !hp.within_bounds() {
                    return Err(TunerError::BadConfig(format!(
                        "grid point out of bounds: {hp}"
                    )));
                }
                if pts.contains(&hp) {
                    return Err(TunerError::BadConfig(format!("duplicate grid point: {hp}")));
                }
                pts.push(hp);
            }
        }
        Ok(pts)
    }
}

/// Evaluates every grid point once, learning rate major.
pub fn grid_tune<O: Objective + ?Sized>(
    objective: &O,
    fitness: &FitnessConfig,
    grid: &GridSpec,
) -> Result<TuneResult, TunerError> {
    fitness.validate()?;
    let pts = grid.points()?;
    let jobs: Vec<(HyperParams, u64)> = pts
        .iter()
        .enumerate()
        .map(|(k, hp)| (*hp, derive_seed(grid.seed, k as u64)))
        .collect();
    let trials = evaluate_all(objective, &jobs, worker_threads())?;
    let mut rec = Recorder {
        fitness,
        entries: Vec::new(),
        best: None,
    };
    for ((hp, seed), trial) in jobs.into_iter().zip(trials) {
        rec.push(hp, Vec::new(), seed, trial);
    }
    let n = rec.entries.len();
    Ok(rec.finish("grid", Vec::new(), n))
}

/// Per-arm means over a set of ledger entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub batch_size: f64,
    pub learning_rate: f64,
    /// Share of evaluations per optimizer, in sgdm, adam, rmsprop order.
    pub optimizer_share: [f64; 3],
    pub layer1_units: f64,
    pub runtime_s: f64,
}

impl ArmSummary {
    pub fn of(entries: &[LedgerEntry]) -> Self {
        let n = entries.len().max(1) as f64;
        let mean = |f: &dyn Fn(&LedgerEntry) -> f64| entries.iter().map(f).sum::<f64>() / n;
        let mut share = [0.0; 3];
        for e in entries {
            let k = super::OPTIMIZER_ORDER
                .iter()
                .position(|o| *o == e.hp.optimizer)
                .expect("listed");
            share[k] += 1.0 / n;
        }
        Self {
            batch_size: mean(&|e| e.hp.batch_size as f64),
            learning_rate: mean(&|e| e.hp.learning_rate),
            optimizer_share: share,
            layer1_units: mean(&|e| e.hp.units[0] as f64),
            runtime_s: mean(&|e| e.runtime_s),
        }
    }
}

/// Paired tuning runs with ("R") and without ("WR") the runtime penalty.
#[derive(Debug, Clone)]
pub struct Ablation {
    pub with_penalty: TuneResult,
    pub without_penalty: TuneResult,
}

impl Ablation {
    pub fn summaries(&self) -> [(String, ArmSummary, ArmSummary); 2] {
        [
            (
                "R".to_string(),
                ArmSummary::of(&self.with_penalty.entries),
                ArmSummary::of(self.with_penalty.final_generation()),
            ),
            (
                "WR".to_string(),
                ArmSummary::of(&self.without_penalty.entries),
                ArmSummary::of(self.without_penalty.final_generation()),
            ),
        ]
    }

    /// Side-by-side table, one row per arm and scope.
    pub fn report_tsv(&self) -> String {
        let mut s = String::from(
            "arm\tscope\tbatch_size\tlearning_rate\tsgdm\tadam\trmsprop\tlayer1_units\truntime_s\tbest_fitness\tbest_rmse\tbest_hp\n",
        );
        for ((arm, all, last), res) in self
            .summaries()
            .iter()
            .zip([&self.with_penalty, &self.without_penalty])
        {
            for (scope, a) in [("all", all), ("final", last)] {
                let _ = writeln!(
                    s,
                    "{arm}\t{scope}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{}",
                    a.batch_size,
                    a.learning_rate,
                    a.optimizer_share[0],
                    a.optimizer_share[1],
                    a.optimizer_share[2],
                    a.layer1_units,
                    a.runtime_s,
                    res.best_fitness(),
                    res.best().rmse,
                    res.best_hp()
                );
            }
        }
        s
    }
}

/// Runs [`cmaes_tune`] twice with identical settings: once with `fitness`
/// as given and once with ω = 0.
pub fn ablation_runtime_penalty<O: Objective + ?Sized>(
    objective: &O,
    fitness: &FitnessConfig,
    settings: &TuneSettings,
) -> Result<Ablation, TunerError> {
    let with_penalty = cmaes_tune(objective, fitness, settings)?;
    let free = FitnessConfig {
        omega: 0.0,
        ..fitness.clone()
    };
    let without_penalty = cmaes_tune(objective, &free, settings)?;
    Ok(Ablation {
        with_penalty,
        without_penalty,
    })
}
