//! Learning-rate by batch-size grid search with two fixed layers.

use windcast::data::{synth_wind, PreparedData, SynthParams};
use windcast::tuner::{grid_tune, FitnessConfig, GridSpec, LstmObjective};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let series = synth_wind(8_000, 10, 5, SynthParams::default())?;
    let data = PreparedData::from_series(&series, 6, 1, 144, 5)?;
    let fitness = FitnessConfig {
        epochs: 4,
        max_train_samples: Some(300),
        max_val_samples: Some(200),
        ..FitnessConfig::default()
    };
    let obj = LstmObjective::new(&data, fitness.clone(), 5)?;
    let grid = GridSpec {
        learning_rates: vec![1e-4, 1e-3, 1e-2],
        batch_sizes: vec![8, 64, 512],
        units: vec![40, 30],
        ..GridSpec::default()
    };
    let res = grid_tune(&obj, &fitness, &grid)?;
    println!("L_R\tB_S\trmse");
    for e in &res.entries {
        println!(
            "{:e}\t{}\t{:.4}",
            e.hp.learning_rate, e.hp.batch_size, e.rmse
        );
    }
    println!("best: {}", res.best_hp());
    Ok(())
}
