//! Train through the experiment layer, then reload a checkpoint and score it
//! again from disk.

use windcast::experiment::{cmd_evaluate, cmd_train, ExperimentConfig, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join("windcast-checkpoint-example");
    let mut cfg = ExperimentConfig::default();
    cfg.out = out.clone();
    cfg.repetitions = 3;
    cfg.data.synth = Some(SynthConfig {
        n: 6_000,
        ..SynthConfig::default()
    });
    cfg.model.hidden = vec![24];
    cfg.model.epochs = 8;
    cfg.model.batch_size = 32;

    let run = cmd_train(&cfg)?;
    print!("{}", run.summary.to_tsv());
    let ev = cmd_evaluate(&cfg, &run.checkpoints[0])?;
    println!(
        "reloaded {}: test rmse {:.6}",
        run.checkpoints[0].display(),
        ev.test.rmse
    );
    println!("outputs under {}", out.display());
    Ok(())
}
