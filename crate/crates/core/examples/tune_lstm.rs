//! CMA-ES hyperparameter search over layers, units, learning rate, batch
//! size and optimizer, at a size that runs in about a minute.

use windcast::data::{synth_wind, PreparedData, SynthParams};
use windcast::tuner::{cmaes_tune, FitnessConfig, LstmObjective, TuneSettings};

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
    let settings = TuneSettings {
        budget: 36,
        seed: 5,
        ..TuneSettings::default()
    };
    let res = cmaes_tune(&obj, &fitness, &settings)?;
    print!("{}", res.ledger_tsv());
    println!();
    print!("{}", res.summary_kv());
    Ok(())
}
