//! Per-repetition result tables with mean/min/max/std rows, and Friedman
//! comparisons between runs.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::metrics::{friedman_ranks, EvalReport, FriedmanResult, METRIC_NAMES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub rep: usize,
    pub seed: u64,
    pub train: EvalReport,
    pub test: EvalReport,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation (n - 1); zero for a single repetition.
    pub std: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub repetitions: Vec<RepetitionRecord>,
}

/// Column names of the summary table, `<split>_<metric>` plus runtime.
pub fn summary_columns() -> Vec<String> {
    let mut cols = Vec::new();
    for split in ["train", "test"] {
        for (m, _) in METRIC_NAMES {
            cols.push(format!("{split}_{m}"));
        }
    }
    cols.push("runtime_s".into());
    cols
}

impl RunSummary {
    pub fn new(label: impl Into<String>, repetitions: Vec<RepetitionRecord>) -> Self {
        Self {
            label: label.into(),
            repetitions,
        }
    }

    /// One value per repetition for a column of [`summary_columns`].
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        if name == "runtime_s" {
            return Some(self.repetitions.iter().map(|r| r.runtime_s).collect());
        }
        let (split, metric) = name.split_once('_')?;
        self.repetitions
            .iter()
            .map(|r| match split {
                "train" => r.train.get(metric),
                "test" => r.test.get(metric),
                _ => None,
            })
            .collect()
    }

    pub fn aggregate(&self, name: &str) -> Option<Aggregate> {
        self.column(name)
            .filter(|v| !v.is_empty())
            .map(|v| Aggregate::of(&v))
    }

    /// Repetition rows followed by mean, min, max and std rows.
    pub fn to_tsv(&self) -> String {
        let cols = summary_columns();
        let data: Vec<Vec<f64>> = cols
            .iter()
            .map(|c| self.column(c).expect("known column"))
            .collect();
        let mut s = format!("row\tseed\t{}\n", cols.join("\t"));
        for (i, r) in self.repetitions.iter().enumerate() {
            let _ = write!(s, "{}\t{}", r.rep, r.seed);
            for col in &data {
                let _ = write!(s, "\t{:?}", col[i]);
            }
            s.push('\n');
        }
        let aggs: Vec<Aggregate> = data.iter().map(|v| Aggregate::of(v)).collect();
        for (name, pick) in [
            ("mean", (|a: &Aggregate| a.mean) as fn(&Aggregate) -> f64),
            ("min", |a| a.min),
            ("max", |a| a.max),
            ("std", |a| a.std),
        ] {
            s.push_str(name);
            s.push('\t');
            for a in &aggs {
                let _ = write!(s, "\t{:?}", pick(a));
            }
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.tsv")), self.to_tsv())?;
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json())?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| ExperimentError::Data(format!("{}: {e}", path.display())))
    }
}

/// Friedman ranking of several runs on one test metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricComparison {
    pub metric: String,
    pub lower_is_better: bool,
    pub result: FriedmanResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub metrics: Vec<MetricComparison>,
}

/// Ranks runs on every test metric, treating repetition `i` of each run as
/// one block.
pub fn compare(summaries: &[RunSummary]) -> Result<Comparison, ExperimentError> {
    if summaries.len() < 2 {
        return Err(ExperimentError::Config(
            "compare needs at least two summaries".into(),
        ));
    }
    let reps = summaries[0].repetitions.len();
    if let Some(s) = summaries.iter().find(|s| s.repetitions.len() != reps) {
        return Err(ExperimentError::MismatchedRepetitions(format!(
            "`{}` has {} repetitions, `{}` has {reps}",
            s.label,
            s.repetitions.len(),
            summaries[0].label
        )));
    }
    let mut metrics = Vec::new();
    for (m, lower) in METRIC_NAMES {
        let table: Vec<Vec<f64>> = summaries
            .iter()
            .map(|s| s.column(&format!("test_{m}")).expect("known metric"))
            .collect();
        let result =
            friedman_ranks(&table, lower).map_err(|e| ExperimentError::Runtime(e.to_string()))?;
        metrics.push(MetricComparison {
            metric: m.to_string(),
            lower_is_better: lower,
            result,
        });
    }
    Ok(Comparison {
        labels: summaries.iter().map(|s| s.label.clone()).collect(),
        metrics,
    })
}

impl Comparison {
    /// Mean rank per model and metric, with the test statistic.
    pub fn to_tsv(&self) -> String {
        let mut s = format!(
            "metric\tchi_square\tdf\tp_value\t{}\n",
            self.labels.join("\t")
        );
        for m in &self.metrics {
            let _ = write!(
                s,
                "{}\t{:?}\t{}\t{:?}",
                m.metric, m.result.chi_square, m.result.df, m.result.p_value
            );
            for r in &m.result.mean_ranks {
                let _ = write!(s, "\t{r:?}");
            }
            s.push('\n');
        }
        s
    }

    /// Per-run rank table: one row per (metric, repetition).
    pub fn ranks_tsv(&self) -> String {
        let mut s = format!("metric\trep\t{}\n", self.labels.join("\t"));
        for m in &self.metrics {
            let runs = m.result.ranks.first().map_or(0, |r| r.len());
            for j in 0..runs {
                let _ = write!(s, "{}\t{j}", m.metric);
                for model in &m.result.ranks {
                    let _ = write!(s, "\t{:?}", model[j]);
                }
                s.push('\n');
            }
        }
        s
    }
}
