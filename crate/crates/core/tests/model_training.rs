use iiot_anomaly::dataset::{generate_synthetic, GeneratorConfig};
use iiot_anomaly::models::{ArchitectureId, Autoencoder, ModelSpec};
use iiot_anomaly::nn::{Checkpoint, TrainConfig};
use iiot_anomaly::signal::{assemble_features, fit_normalizer, window, FeatureSetId, Window, WindowBatch, WINDOW_SIZE};
use iiot_anomaly::tensor::Tensor;

fn healthy_windows(fs: FeatureSetId, n_per_condition: usize, seed: u64) -> (Vec<Window>, Vec<Window>) {
    let ds = generate_synthetic(&GeneratorConfig {
        n_samples_per_condition: n_per_condition,
        anomaly_fraction: 0.0,
        seed,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let features: Vec<_> = ds.samples.iter().map(|s| assemble_features(s, fs).unwrap()).collect();
    let (train, held) = features.split_at(features.len() * 4 / 5);
    let nz = fit_normalizer(train).unwrap();
    let windows = |fms: &[_]| -> Vec<Window> {
        fms.iter().flat_map(|fm| window(&nz.apply(fm).unwrap(), WINDOW_SIZE, WINDOW_SIZE).unwrap().windows).collect()
    };
    (windows(train), windows(held))
}

fn batch(windows: Vec<Window>) -> WindowBatch {
    WindowBatch { windows, window_size: WINDOW_SIZE, stride: WINDOW_SIZE }
}

#[test]
fn training_lowers_reconstruction_error_on_held_out_windows() {
    let (train, held) = healthy_windows(FeatureSetId::Vib3d, 10, 1);
    let spec = ModelSpec::new(ArchitectureId::Dnn, 3);
    let untrained = Autoencoder::new(spec.clone(), 5).unwrap();
    let mut trained = untrained.clone();
    let report = trained
        .train(&batch(train), &TrainConfig { max_epochs: 15, ..TrainConfig::default() })
        .unwrap();
    assert!(report.loss_history.last().unwrap() < &report.loss_history[0]);
    let better = held
        .iter()
        .filter(|w| trained.window_error(w).unwrap() < untrained.window_error(w).unwrap())
        .count();
    assert!(better * 100 >= held.len() * 95, "{better} of {}", held.len());
}

#[test]
fn constant_windows_are_memorized_by_every_architecture() {
    for (arch, epochs) in [(ArchitectureId::Dnn, 60), (ArchitectureId::Cnn, 60), (ArchitectureId::Lstm, 60)] {
        let mut spec = ModelSpec::new(arch, 1);
        if arch == ArchitectureId::Lstm {
            spec.n = 16;
        }
        let windows: Vec<Window> = (0..16)
            .map(|i| Window { sample_id: i, window_index: 0, values: Tensor::filled(1, WINDOW_SIZE, 0.5) })
            .collect();
        let mut ae = Autoencoder::new(spec, 2).unwrap();
        ae.train(
            &batch(windows.clone()),
            &TrainConfig { max_epochs: epochs, batch_size: 4, learning_rate: 1e-2, early_stop_patience: epochs, seed: 0 },
        )
        .unwrap();
        let err = ae.window_error(&windows[0]).unwrap();
        assert!(err < 1e-2, "{arch}: {err}");
    }
}

#[test]
fn checkpoints_reproduce_reconstructions_exactly() {
    let (train, held) = healthy_windows(FeatureSetId::FftVib1dAudio, 2, 3);
    for arch in [ArchitectureId::Dnn, ArchitectureId::Lstm, ArchitectureId::Cnn] {
        let mut spec = ModelSpec::new(arch, 2);
        spec.n = if arch == ArchitectureId::Dnn { 64 } else { 32 };
        let mut ae = Autoencoder::new(spec.clone(), 8).unwrap();
        ae.train(&batch(train.clone()), &TrainConfig { max_epochs: 1, ..TrainConfig::default() }).unwrap();
        let json = Checkpoint::from_model(&ae.model).to_json().unwrap();
        let back: Checkpoint = serde_json::from_str(&json).unwrap();
        let restored = Autoencoder::from_model(spec, back.into_model().unwrap()).unwrap();
        for w in &held {
            assert_eq!(ae.reconstruct(w).unwrap(), restored.reconstruct(w).unwrap());
        }
    }
}

#[test]
fn training_is_deterministic() {
    let (train, _) = healthy_windows(FeatureSetId::Audio, 2, 4);
    let run = || {
        let mut ae = Autoencoder::new(ModelSpec::new(ArchitectureId::Cnn, 1), 1).unwrap();
        let report = ae.train(&batch(train.clone()), &TrainConfig { max_epochs: 2, ..TrainConfig::default() }).unwrap();
        (Checkpoint::from_model(&ae.model).to_json().unwrap(), report)
    };
    assert_eq!(run(), run());
}
