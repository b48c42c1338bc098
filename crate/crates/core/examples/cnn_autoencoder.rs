//! Layer-by-layer shapes of the convolutional autoencoder and the
//! reconstruction of one window before and after a short training run.

use iiot_anomaly::dataset::{generate_synthetic, GeneratorConfig};
use iiot_anomaly::models::{ArchitectureId, Autoencoder, ModelSpec};
use iiot_anomaly::nn::TrainConfig;
use iiot_anomaly::signal::{assemble_features, fit_normalizer, window, FeatureSetId, WindowBatch, WINDOW_SIZE};

fn main() -> iiot_anomaly::Result<()> {
    let fs = FeatureSetId::FftVib3d;
    let mut ae = Autoencoder::new(ModelSpec::new(ArchitectureId::Cnn, fs.channel_count()), 0)?;
    let mut shape = ae.model.input_shape();
    println!("input {shape:?}");
    for (spec, out) in ae.model.layer_specs().iter().zip(ae.model.layer_output_shapes()) {
        println!("  {:<10} {shape:?} -> {out:?}", spec.name());
        shape = out;
    }
    println!("{} parameters", ae.model.param_count());

    let ds = generate_synthetic(&GeneratorConfig {
        n_samples_per_condition: 10,
        anomaly_fraction: 0.0,
        ..GeneratorConfig::default()
    })?;
    let features = ds.samples.iter().map(|s| assemble_features(s, fs)).collect::<Result<Vec<_>, _>>()?;
    let nz = fit_normalizer(&features)?;
    let mut batch = WindowBatch::empty(WINDOW_SIZE, WINDOW_SIZE);
    for fm in &features {
        batch.extend(window(&nz.apply(fm)?, WINDOW_SIZE, WINDOW_SIZE)?);
    }
    let probe = batch.windows[0].clone();
    let before = ae.window_error(&probe)?;
    ae.train(&batch, &TrainConfig { max_epochs: 5, ..TrainConfig::default() })?;
    println!("window error {before:.5} -> {:.5}", ae.window_error(&probe)?);
    Ok(())
}
