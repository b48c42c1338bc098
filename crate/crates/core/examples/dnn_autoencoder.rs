//! Trains the fully connected autoencoder on healthy 3-axis vibration
//! windows, calibrates a threshold on held-out healthy windows and scores
//! the evaluation samples, all without the harness.

use iiot_anomaly::dataset::{generate_synthetic, split, GeneratorConfig, SensorSample, SplitSpec};
use iiot_anomaly::detect::{calibrate_threshold, evaluate, AnomalyScore};
use iiot_anomaly::models::{ArchitectureId, Autoencoder, ModelSpec};
use iiot_anomaly::nn::{Checkpoint, TrainConfig};
use iiot_anomaly::signal::{assemble_features, fit_normalizer, window, FeatureSetId, Normalizer, Window, WindowBatch, WINDOW_SIZE};

const FS: FeatureSetId = FeatureSetId::Vib3d;

fn windows(samples: &[SensorSample], nz: &Normalizer) -> iiot_anomaly::Result<Vec<Vec<Window>>> {
    samples
        .iter()
        .map(|s| Ok(window(&nz.apply(&assemble_features(s, FS)?)?, WINDOW_SIZE, WINDOW_SIZE)?.windows))
        .collect()
}

fn main() -> iiot_anomaly::Result<()> {
    let ds = generate_synthetic(&GeneratorConfig {
        n_samples_per_condition: 40,
        ..GeneratorConfig::default()
    })?;
    let sp = split(&ds, &SplitSpec::default(), 0)?;
    let train_features = sp.train.samples.iter().map(|s| assemble_features(s, FS)).collect::<Result<Vec<_>, _>>()?;
    let nz = fit_normalizer(&train_features)?;

    let mut ae = Autoencoder::new(ModelSpec::new(ArchitectureId::Dnn, FS.channel_count()), 1)?;
    let batch = WindowBatch {
        windows: windows(&sp.train.samples, &nz)?.concat(),
        window_size: WINDOW_SIZE,
        stride: WINDOW_SIZE,
    };
    let report = ae.train(&batch, &TrainConfig { max_epochs: 20, ..TrainConfig::default() })?;
    println!(
        "trained {} epochs on {} windows, loss {:.5} -> {:.5}",
        report.epochs_run(),
        batch.len(),
        report.loss_history[0],
        report.loss_history[report.best_epoch]
    );

    let calibration: Vec<f64> = windows(&sp.threshold.samples, &nz)?
        .concat()
        .iter()
        .map(|w| ae.window_error(w))
        .collect::<Result<_, _>>()?;
    let th = calibrate_threshold(&calibration)?;
    println!("threshold {:.5} = mean {:.5} + std {:.5}", th.value, th.mean, th.std);

    let mut predicted = Vec::new();
    for (s, ws) in sp.eval.samples.iter().zip(windows(&sp.eval.samples, &nz)?) {
        let errors = ws.iter().map(|w| ae.window_error(w)).collect::<Result<Vec<_>, _>>()?;
        predicted.push(AnomalyScore::new(s.sample_id, errors).decide(&th));
    }
    let truth: Vec<bool> = sp.eval.samples.iter().map(|s| s.is_anomaly).collect();
    let m = evaluate(&predicted, &truth)?;
    println!("eval: accuracy {:.3} precision {:.3} recall {:.3} F1 {:.3}", m.accuracy, m.precision, m.recall, m.f1);

    let json = Checkpoint::from_model(&ae.model).to_json()?;
    println!("checkpoint: {} bytes of JSON", json.len());
    Ok(())
}
