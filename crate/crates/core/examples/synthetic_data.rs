//! Generate a synthetic 10-minute wind series, window it, split it into
//! day blocks and score the persistence baseline.

use windcast::data::{persistence_forecast, synth_wind, PreparedData, SynthParams};
use windcast::metrics::evaluate_excluding_calms;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let series = synth_wind(20_000, 10, 7, SynthParams::default())?;
    let v = series.values();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "{} samples from {}, mean speed {mean:.2} m/s",
        series.len(),
        series.start()
    );

    for (lag, horizon) in [(6, 1), (12, 6)] {
        let data = PreparedData::from_series(&series, lag, horizon, 144, 7)?;
        println!(
            "lag {lag}, horizon {horizon}: {} train / {} validation / {} test windows",
            data.train.len(),
            data.validation.len(),
            data.test.len()
        );
        let pred: Vec<f64> = persistence_forecast(&data.test)?
            .into_iter()
            .map(|p| data.norm.denormalize(p))
            .collect();
        let rep = evaluate_excluding_calms(&pred, &data.test.targets_denormalized())?;
        print!("  persistence on test\n{}", indent(&rep.to_kv()));
    }
    Ok(())
}

fn indent(s: &str) -> String {
    s.lines().map(|l| format!("    {l}\n")).collect()
}
