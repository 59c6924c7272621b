use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use windcast::experiment::{self, ExperimentConfig, ExperimentError, Horizon, SynthConfig};

#[derive(Parser)]
#[command(
    name = "windcast",
    version,
    about = "LSTM wind-speed forecasting with CMA-ES tuning"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; without one a synthetic series is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Training repetitions.
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// 10min, 1h or a step count.
    #[arg(long, global = true)]
    horizon: Option<String>,
    /// Epochs for both final training and tuning evaluations.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Tuning evaluations.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Length of the synthetic series.
    #[arg(long, global = true)]
    n: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the synthetic series to <out>/synth.csv.
    Synth,
    /// Train the fixed [model] configuration.
    Train,
    /// CMA-ES hyperparameter search, then retrain the best configuration.
    Tune {
        /// Run the with/without runtime-penalty comparison instead.
        #[arg(long)]
        ablation: bool,
    },
    /// Learning-rate by batch-size grid search.
    Grid,
    /// Score a checkpoint on train and test partitions.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Friedman ranks of several summary.json files.
    Compare {
        #[arg(required = true, num_args = 2..)]
        summaries: Vec<PathBuf>,
    },
}

fn build_config(c: &Common) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let mut cfg = ExperimentConfig::default();
            cfg.data.synth = Some(SynthConfig::default());
            cfg
        }
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(r) = c.reps {
        cfg.repetitions = r;
    }
    if let Some(h) = &c.horizon {
        cfg.data.horizon = Horizon::parse(h)?;
    }
    if let Some(e) = c.epochs {
        cfg.model.epochs = e;
        cfg.fitness.epochs = e;
    }
    if let Some(b) = c.budget {
        cfg.cmaes.budget = b;
    }
    if let Some(n) = c.n {
        match cfg.data.synth.as_mut() {
            Some(s) => s.n = n,
            None => {
                return Err(ExperimentError::Config(
                    "--n needs a synthetic data source".into(),
                ))
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    if let Cmd::Compare { summaries } = &cli.cmd {
        let out = cli
            .common
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("windcast-out"));
        let cmp = experiment::cmd_compare(summaries, &out)?;
        print!("{}", cmp.to_tsv());
        return Ok(());
    }
    let cfg = build_config(&cli.common)?;
    match cli.cmd {
        Cmd::Synth => {
            let path = experiment::cmd_synth(&cfg)?;
            println!("{}", path.display());
        }
        Cmd::Train => {
            let run = experiment::cmd_train(&cfg)?;
            print!("{}", run.summary.to_tsv());
        }
        Cmd::Tune { ablation: false } => {
            let run = experiment::cmd_tune(&cfg)?;
            print!("{}", run.tune.summary_kv());
            print!("{}", run.retrain.summary.to_tsv());
        }
        Cmd::Tune { ablation: true } => {
            let ab = experiment::cmd_ablation(&cfg)?;
            print!("{}", ab.report_tsv());
        }
        Cmd::Grid => {
            let run = experiment::cmd_grid(&cfg)?;
            print!("{}", experiment::surface_tsv(&run.surface));
        }
        Cmd::Evaluate { checkpoint } => {
            let run = experiment::cmd_evaluate(&cfg, &checkpoint)?;
            println!("[train]\n{}[test]\n{}", run.train.to_kv(), run.test.to_kv());
        }
        Cmd::Compare { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("windcast: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
