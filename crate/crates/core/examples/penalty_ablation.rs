//! Tune twice, with and without the runtime penalty, and compare the
//! configurations each arm settles on.

use windcast::data::{synth_wind, PreparedData, SynthParams};
use windcast::tuner::{ablation_runtime_penalty, FitnessConfig, LstmObjective, TuneSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let series = synth_wind(8_000, 10, 9, SynthParams::default())?;
    let data = PreparedData::from_series(&series, 6, 1, 144, 9)?;
    // a small allowance so that training time matters at this size
    let fitness = FitnessConfig {
        epochs: 4,
        rho: 0.1,
        omega: 2.0,
        max_train_samples: Some(300),
        max_val_samples: Some(200),
        ..FitnessConfig::default()
    };
    let obj = LstmObjective::new(&data, fitness.clone(), 9)?;
    let settings = TuneSettings {
        budget: 36,
        seed: 9,
        ..TuneSettings::default()
    };
    let ab = ablation_runtime_penalty(&obj, &fitness, &settings)?;
    print!("{}", ab.report_tsv());
    Ok(())
}
