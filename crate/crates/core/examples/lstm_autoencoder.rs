//! LSTM autoencoder on raw audio through the harness building blocks:
//! fit one combination, then evaluate it.

use iiot_anomaly::dataset::{generate_synthetic, split, GeneratorConfig, SplitSpec};
use iiot_anomaly::harness::{evaluate_combination, fit_combination, DetectorConfig, FittedModel};
use iiot_anomaly::models::lstm_units;
use iiot_anomaly::nn::TrainConfig;
use iiot_anomaly::signal::FeatureSetId;

fn main() -> iiot_anomaly::Result<()> {
    let ds = generate_synthetic(&GeneratorConfig {
        n_samples_per_condition: 20,
        ..GeneratorConfig::default()
    })?;
    let sp = split(&ds, &SplitSpec::default(), 0)?;
    let n = 32;
    println!("layer units for n = {n}: {:?}", lstm_units(n)?);
    let detector = DetectorConfig::Lstm {
        n,
        train: Some(TrainConfig { max_epochs: 3, ..TrainConfig::default() }),
    };
    let state = fit_combination(&sp, &detector, FeatureSetId::Audio, &TrainConfig::default())?;
    if let FittedModel::Autoencoder { checkpoint, .. } = &state.model {
        println!("{} tensors in the checkpoint", checkpoint.tensors.len());
    }
    let row = evaluate_combination(&state, &sp)?;
    let m = row.metrics;
    println!("threshold {:.5}", row.threshold.value);
    println!("tp {} fp {} tn {} fn {}  F1 {:.3}", m.tp, m.fp, m.tn, m.fn_, m.f1);
    for r in row.timeline.iter().filter(|r| r.flagged != r.truth) {
        println!("misclassified sample {} ({}) score {:.5}", r.sample_id, r.split, r.score);
    }
    Ok(())
}
