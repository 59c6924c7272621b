//! Forecast accuracy indices and Friedman rank comparison.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

/// Observations with magnitude at or below this (m/s) make MAPE undefined.
pub const MAPE_EPSILON: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} predictions vs {1} observations")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("observations too close to zero for MAPE at indices {0:?}")]
    NearZeroObservation(Vec<usize>),
    #[error("constant sequence; correlation undefined")]
    ConstantSequence,
    #[error("degenerate score table: {0}")]
    DegenerateTable(String),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

fn check(pred: &[f64], obs: &[f64]) -> Result<()> {
    if pred.len() != obs.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), obs.len()));
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(i) = pred
        .iter()
        .zip(obs)
        .position(|(p, o)| !p.is_finite() || !o.is_finite())
    {
        return Err(MetricsError::NonFinite(i));
    }
    Ok(())
}

pub fn mse(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check(pred, obs)?;
    Ok(pred
        .iter()
        .zip(obs)
        .map(|(p, o)| (p - o) * (p - o))
        .sum::<f64>()
        / pred.len() as f64)
}

pub fn rmse(pred: &[f64], obs: &[f64]) -> Result<f64> {
    mse(pred, obs).map(f64::sqrt)
}

pub fn mae(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check(pred, obs)?;
    Ok(pred
        .iter()
        .zip(obs)
        .map(|(p, o)| (p - o).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

/// Mean absolute percentage error, in percent.
pub fn mape(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check(pred, obs)?;
    let near_zero: Vec<usize> = obs
        .iter()
        .enumerate()
        .filter(|(_, o)| o.abs() <= MAPE_EPSILON)
        .map(|(i, _)| i)
        .collect();
    if !near_zero.is_empty() {
        return Err(MetricsError::NearZeroObservation(near_zero));
    }
    Ok(100.0
        * pred
            .iter()
            .zip(obs)
            .map(|(p, o)| ((p - o) / o).abs())
            .sum::<f64>()
        / pred.len() as f64)
}

/// Pearson correlation between predictions and observations, clamped to
/// `[-1, 1]` against rounding overshoot.
pub fn pearson_r(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check(pred, obs)?;
    if pred.len() < 2 {
        return Err(MetricsError::ConstantSequence);
    }
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mo = obs.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, o) in pred.iter().zip(obs) {
        let (dp, d_o) = (p - mp, o - mo);
        sxy += dp * d_o;
        sxx += dp * dp;
        syy += d_o * d_o;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::ConstantSequence);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// The five accuracy indices of one prediction run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub mape_pct: f64,
    pub r: f64,
    pub n: usize,
    /// Observations left out of MAPE by [`evaluate_excluding_calms`].
    #[serde(default, skip_serializing_if = "is_zero")]
    pub mape_excluded: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

/// Metric names in report order, paired with whether lower is better.
pub const METRIC_NAMES: [(&str, bool); 5] = [
    ("mse", true),
    ("rmse", true),
    ("mae", true),
    ("mape_pct", true),
    ("r", false),
];

impl EvalReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "mse" => self.mse,
            "rmse" => self.rmse,
            "mae" => self.mae,
            "mape_pct" => self.mape_pct,
            "r" => self.r,
            "n" => self.n as f64,
            _ => return None,
        })
    }

    /// One `key=value` line per metric.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (name, _) in METRIC_NAMES {
            writeln!(s, "{name}={:?}", self.get(name).expect("known")).expect("string write");
        }
        writeln!(s, "n={}", self.n).expect("string write");
        s
    }
}

/// All five indices; fails on any input the individual metrics reject.
pub fn evaluate(pred: &[f64], obs: &[f64]) -> Result<EvalReport> {
    let mse = mse(pred, obs)?;
    Ok(EvalReport {
        mse,
        rmse: mse.sqrt(),
        mae: mae(pred, obs)?,
        mape_pct: mape(pred, obs)?,
        r: pearson_r(pred, obs)?,
        n: pred.len(),
        mape_excluded: 0,
    })
}

/// Like [`evaluate`], but computes MAPE only over observations above
/// [`MAPE_EPSILON`] and records how many were left out. Calm periods occur
/// in real and synthetic wind records, and every other index stays defined
/// on them.
pub fn evaluate_excluding_calms(pred: &[f64], obs: &[f64]) -> Result<EvalReport> {
    check(pred, obs)?;
    let (kp, ko): (Vec<f64>, Vec<f64>) = pred
        .iter()
        .zip(obs)
        .filter(|(_, o)| o.abs() > MAPE_EPSILON)
        .map(|(p, o)| (*p, *o))
        .unzip();
    let mape_pct = if kp.is_empty() {
        f64::NAN
    } else {
        mape(&kp, &ko)?
    };
    let mse = mse(pred, obs)?;
    Ok(EvalReport {
        mse,
        rmse: mse.sqrt(),
        mae: mae(pred, obs)?,
        mape_pct,
        r: pearson_r(pred, obs)?,
        n: pred.len(),
        mape_excluded: pred.len() - kp.len(),
    })
}

/// Friedman mean ranks of `k` models over `n` runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    /// Per-run ranks, `ranks[model][run]`, 1 = best, ties averaged.
    pub ranks: Vec<Vec<f64>>,
    pub mean_ranks: Vec<f64>,
    pub chi_square: f64,
    pub df: usize,
    /// Upper-tail probability of `chi_square` under a chi-square
    /// distribution with `df` degrees of freedom, evaluated through the
    /// regularized incomplete gamma function.
    pub p_value: f64,
}

/// Ranks the models (rows of `scores`) within each run (column), averaging
/// tied ranks, and forms `12n / (k(k+1)) * sum_j (R_j - (k+1)/2)^2`.
pub fn friedman_ranks(scores: &[Vec<f64>], lower_is_better: bool) -> Result<FriedmanResult> {
    let k = scores.len();
    if k < 2 {
        return Err(MetricsError::DegenerateTable(format!(
            "{k} models, need at least 2"
        )));
    }
    let n = scores[0].len();
    if n < 2 {
        return Err(MetricsError::DegenerateTable(format!(
            "{n} runs, need at least 2"
        )));
    }
    if scores.iter().any(|row| row.len() != n) {
        return Err(MetricsError::DegenerateTable("ragged table".into()));
    }
    if scores.iter().flatten().any(|v| !v.is_finite()) {
        return Err(MetricsError::DegenerateTable("non-finite score".into()));
    }

    let mut ranks = vec![vec![0.0; n]; k];
    for run in 0..n {
        let mut order: Vec<usize> = (0..k).collect();
        let key = |m: usize| {
            if lower_is_better {
                scores[m][run]
            } else {
                -scores[m][run]
            }
        };
        order.sort_by(|&a, &b| key(a).total_cmp(&key(b)));
        let mut pos = 0;
        while pos < k {
            let mut end = pos + 1;
            while end < k && key(order[end]) == key(order[pos]) {
                end += 1;
            }
            // positions pos..end share ranks pos+1..=end
            let avg = (pos + 1 + end) as f64 / 2.0;
            for &m in &order[pos..end] {
                ranks[m][run] = avg;
            }
            pos = end;
        }
    }
    let mean_ranks: Vec<f64> = ranks
        .iter()
        .map(|r| r.iter().sum::<f64>() / n as f64)
        .collect();
    let (kf, nf) = (k as f64, n as f64);
    let center = (kf + 1.0) / 2.0;
    let chi_square = 12.0 * nf / (kf * (kf + 1.0))
        * mean_ranks.iter().map(|r| (r - center).powi(2)).sum::<f64>();
    let df = k - 1;
    let p_value = ChiSquared::new(df as f64)
        .map(|d| d.sf(chi_square))
        .unwrap_or(f64::NAN);
    Ok(FriedmanResult {
        ranks,
        mean_ranks,
        chi_square,
        df,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[3.0, 3.0], &[2.0, 4.0]).unwrap(), 1.0);
        assert_eq!(mae(&[1.0], &[]), Err(MetricsError::LengthMismatch(1, 0)));
        assert_eq!(mae(&[], &[]), Err(MetricsError::Empty));
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!((rmse(&[1.0, 2.0], &[0.0, 0.0]).unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((rmse(&[1.0, 2.0], &[0.0, 0.0]).unwrap() - 1.5811).abs() < 1e-4);
    }

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[3.0, 3.0], &[2.0, 4.0]).unwrap(), 37.5);
        assert_eq!(mape(&[2.0, 4.0], &[2.0, 4.0]).unwrap(), 0.0);
        assert_eq!(
            mape(&[1.0, 1.0, 1.0], &[1.0, 0.0, 0.05]),
            Err(MetricsError::NearZeroObservation(vec![1, 2]))
        );
    }

    #[test]
    fn pearson_examples() {
        assert_eq!(pearson_r(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(pearson_r(&[3.0, 2.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), -1.0);
        // textbook two-pass formula, evaluated separately
        let r = pearson_r(&[1.1, 1.9, 3.2, 3.8], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r - 0.990_847_000_186_092_3).abs() < 1e-12, "{r}");
        assert_eq!(
            pearson_r(&[1.0, 1.0], &[1.0, 2.0]),
            Err(MetricsError::ConstantSequence)
        );
    }

    #[test]
    fn evaluate_perfect() {
        let obs = [3.0, 5.0, 7.5, 9.0];
        let rep = evaluate(&obs, &obs).unwrap();
        assert_eq!(
            (rep.mse, rep.rmse, rep.mae, rep.mape_pct, rep.r),
            (0.0, 0.0, 0.0, 0.0, 1.0)
        );
        assert_eq!(rep.n, 4);
    }

    #[test]
    fn calm_observations_excluded_from_mape_only() {
        let pred = [1.0, 2.0, 3.0, 3.5];
        let obs = [0.05, 2.5, 3.0, 4.0];
        assert!(evaluate(&pred, &obs).is_err());
        let rep = evaluate_excluding_calms(&pred, &obs).unwrap();
        assert_eq!(rep.mape_excluded, 1);
        assert_eq!(rep.mape_pct, mape(&pred[1..], &obs[1..]).unwrap());
        assert_eq!(rep.mse, mse(&pred, &obs).unwrap());
    }

    #[test]
    fn kv_format() {
        let rep = evaluate(&[3.0, 3.0, 4.0], &[2.0, 4.0, 4.0]).unwrap();
        let text = rep.to_kv();
        let keys: Vec<&str> = text.lines().map(|l| l.split('=').next().unwrap()).collect();
        assert_eq!(keys, ["mse", "rmse", "mae", "mape_pct", "r", "n"]);
        let json = serde_json::to_value(rep).unwrap();
        for k in keys {
            assert!(json.get(k).is_some(), "{k}");
        }
    }

    #[test]
    fn friedman_dominant_model() {
        let table = vec![
            vec![0.5, 0.6, 0.4, 0.7],
            vec![0.9, 0.8, 0.9, 0.8],
            vec![1.0, 1.2, 0.95, 0.9],
        ];
        let f = friedman_ranks(&table, true).unwrap();
        assert_eq!(f.mean_ranks, vec![1.0, 2.0, 3.0]);
        assert_eq!(f.df, 2);
        // 12*4/(3*4) * ((1-2)^2 + 0 + (3-2)^2) = 8
        assert!((f.chi_square - 8.0).abs() < 1e-12);
        let flipped = friedman_ranks(&table, false).unwrap();
        assert_eq!(flipped.mean_ranks, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn friedman_ties_average() {
        let table = vec![vec![1.0, 2.0], vec![1.0, 3.0], vec![0.5, 4.0]];
        let f = friedman_ranks(&table, true).unwrap();
        assert_eq!(f.ranks[0][0], 2.5);
        assert_eq!(f.ranks[1][0], 2.5);
        assert_eq!(f.ranks[2][0], 1.0);
    }

    #[test]
    fn friedman_degenerate() {
        assert!(friedman_ranks(&[vec![1.0, 2.0]], true).is_err());
        assert!(friedman_ranks(&[vec![1.0], vec![2.0]], true).is_err());
        assert!(friedman_ranks(&[vec![1.0, 2.0], vec![2.0]], true).is_err());
        assert!(friedman_ranks(&[vec![1.0, f64::NAN], vec![2.0, 1.0]], true).is_err());
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..60).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.2f64..30.0, n),
                proptest::collection::vec(0.2f64..30.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_ordered((a, b) in pair()) {
            prop_assert_eq!(mae(&a, &b).unwrap(), mae(&b, &a).unwrap());
            prop_assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());
            prop_assert!(rmse(&a, &b).unwrap() >= mae(&a, &b).unwrap() * (1.0 - 1e-12));
        }

        #[test]
        fn rmse_equals_mae_for_equal_errors(base in proptest::collection::vec(1.0f64..20.0, 1..40), e in 0.0f64..3.0) {
            let shifted: Vec<f64> = base.iter().enumerate().map(|(i, v)| if i % 2 == 0 { v + e } else { v - e }).collect();
            let (r, m) = (rmse(&shifted, &base).unwrap(), mae(&shifted, &base).unwrap());
            prop_assert!((r - m).abs() <= 1e-12 * r.max(1.0));
        }

        #[test]
        fn r_affine_invariance((p, o) in pair(), a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], c in -10.0f64..10.0) {
            let Ok(r0) = pearson_r(&p, &o) else { return Ok(()); };
            let q: Vec<f64> = p.iter().map(|x| a * x + c).collect();
            let r1 = pearson_r(&q, &o).unwrap();
            prop_assert!((r1 - a.signum() * r0).abs() < 1e-12);
        }

        #[test]
        fn mape_scale_invariant((p, o) in pair(), k in 0.5f64..20.0) {
            let ps: Vec<f64> = p.iter().map(|x| x * k).collect();
            let os: Vec<f64> = o.iter().map(|x| x * k).collect();
            let (m0, m1) = (mape(&p, &o).unwrap(), mape(&ps, &os).unwrap());
            prop_assert!((m0 - m1).abs() <= 1e-10 * m0.max(1.0));
        }

        #[test]
        fn friedman_rank_sums(table in (2usize..6, 2usize..8).prop_flat_map(|(k, n)|
            proptest::collection::vec(proptest::collection::vec(0i32..4, n), k))) {
            let t: Vec<Vec<f64>> = table.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
            let (k, n) = (t.len() as f64, t[0].len() as f64);
            let f = friedman_ranks(&t, true).unwrap();
            let total: f64 = f.ranks.iter().flatten().sum();
            prop_assert!((total - n * k * (k + 1.0) / 2.0).abs() < 1e-9);
            prop_assert!((f.mean_ranks.iter().sum::<f64>() - k * (k + 1.0) / 2.0).abs() < 1e-9);
        }

        #[test]
        fn report_identity((p, o) in pair()) {
            if let Ok(rep) = evaluate(&p, &o) {
                prop_assert!((rep.rmse * rep.rmse - rep.mse).abs() <= 1e-12 * rep.mse.max(1.0));
            }
        }
    }
}
