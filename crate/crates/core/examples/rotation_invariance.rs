//! Remounting the vibration sensor mixes its three axes by an orthogonal
//! matrix. The per-time-index norm does not change, the per-axis features
//! do.

use iiot_anomaly::dataset::{generate_synthetic, GeneratorConfig};
use iiot_anomaly::signal::{assemble_features, FeatureSetId};

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn main() -> iiot_anomaly::Result<()> {
    let ds = generate_synthetic(&GeneratorConfig {
        n_samples_per_condition: 1,
        ..GeneratorConfig::default()
    })?;
    let original = &ds.samples[0];
    let (c, s) = (0.6f64, 0.8f64);
    // Rotation about z followed by a reflection of x.
    let m = [[-c, s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
    let mut remounted = original.clone();
    remounted.rotate_vibration(&m);

    for fs in [FeatureSetId::Vib1d, FeatureSetId::FftVib1d, FeatureSetId::Vib3d, FeatureSetId::FftVib3d] {
        let a = assemble_features(original, fs)?;
        let b = assemble_features(&remounted, fs)?;
        println!("{:<20} max |difference| {:.3e}", fs.display_name(), max_diff(a.values.as_slice(), b.values.as_slice()));
    }
    Ok(())
}
