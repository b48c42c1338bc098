//! Shapes of the eight feature sets for one sample, before and after
//! windowing.

use iiot_anomaly::dataset::{generate_synthetic, GeneratorConfig};
use iiot_anomaly::signal::{assemble_features, fit_normalizer, window, FeatureSetId, WINDOW_SIZE};

fn main() -> iiot_anomaly::Result<()> {
    let ds = generate_synthetic(&GeneratorConfig {
        n_samples_per_condition: 2,
        ..GeneratorConfig::default()
    })?;
    let sample = &ds.samples[0];
    println!("{:<26} {:>8} {:>7} {:>8}  channels", "feature set", "channels", "length", "windows");
    for fs in FeatureSetId::ALL {
        let fm = assemble_features(sample, fs)?;
        let nz = fit_normalizer(std::slice::from_ref(&fm))?;
        let windows = window(&nz.apply(&fm)?, WINDOW_SIZE, WINDOW_SIZE)?;
        println!(
            "{:<26} {:>8} {:>7} {:>8}  {}",
            fs.display_name(),
            fm.channels(),
            fm.length(),
            windows.len(),
            fm.channel_names.join(",")
        );
    }
    Ok(())
}
