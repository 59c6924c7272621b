//! Train a small peephole LSTM and compare it with persistence.

use windcast::data::{persistence_forecast, synth_wind, PreparedData, SynthParams};
use windcast::lstm::{predict_batch, train, LstmNetwork, OptimizerKind, TrainConfig};
use windcast::metrics::rmse;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let series = synth_wind(10_000, 10, 3, SynthParams::default())?;
    let data = PreparedData::from_series(&series, 6, 1, 144, 3)?;

    let net = LstmNetwork::random(1, &[32, 16], 1);
    println!("{} parameters", net.num_params());
    let cfg = TrainConfig::new(OptimizerKind::Adam, 3e-3, 32, 20, 2);
    let out = train(net, &data.train, &data.validation, &cfg)?;
    for e in &out.history {
        println!(
            "epoch {:>2}  train mse {:.5}  val rmse {:.5}",
            e.epoch, e.train_mse, e.val_rmse
        );
    }
    println!("best epoch {} in {:.1}s", out.best_epoch, out.seconds);

    let obs = data.test.targets_denormalized();
    let denorm = |p: Vec<f64>| {
        p.into_iter()
            .map(|v| data.norm.denormalize(v))
            .collect::<Vec<_>>()
    };
    let lstm = denorm(predict_batch(&out.network, &data.test.inputs)?);
    let pers = denorm(persistence_forecast(&data.test)?);
    println!(
        "test rmse: lstm {:.4}, persistence {:.4}",
        rmse(&lstm, &obs)?,
        rmse(&pers, &obs)?
    );
    Ok(())
}
