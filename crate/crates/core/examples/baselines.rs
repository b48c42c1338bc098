//! PCA reconstruction and IQR outlier-ratio benchmarks on vibration norm
//! windows.

use iiot_anomaly::baseline::{iqr_classify, iqr_fit, outlier_ratio, pca_fit, pca_score};
use iiot_anomaly::dataset::{generate_synthetic, split, GeneratorConfig, SplitSpec};
use iiot_anomaly::detect::calibrate_threshold;
use iiot_anomaly::harness::sample_windows;
use iiot_anomaly::signal::{assemble_features, fit_normalizer, FeatureSetId};

fn main() -> iiot_anomaly::Result<()> {
    let fs = FeatureSetId::Vib1d;
    let ds = generate_synthetic(&GeneratorConfig {
        n_samples_per_condition: 30,
        ..GeneratorConfig::default()
    })?;
    let sp = split(&ds, &SplitSpec::default(), 1)?;
    let features = sp.train.samples.iter().map(|s| assemble_features(s, fs)).collect::<Result<Vec<_>, _>>()?;
    let nz = fit_normalizer(&features)?;
    let vectors = |samples: &[iiot_anomaly::dataset::SensorSample]| -> Vec<Vec<f64>> {
        samples
            .iter()
            .flat_map(|s| sample_windows(s, fs, &nz).unwrap())
            .map(|w| w.values.into_vec())
            .collect()
    };
    let (train, calib) = (vectors(&sp.train.samples), vectors(&sp.threshold.samples));

    let pca = pca_fit(&train, 0.95)?;
    println!("PCA keeps {} of {} components ({:.1}% variance)", pca.k, pca.dim(), 100.0 * pca.explained_variance_ratio);
    let th = calibrate_threshold(&calib.iter().map(|v| pca_score(&pca, v)).collect::<Result<Vec<_>, _>>()?)?;
    let iqr = iqr_fit(&train, &calib)?;
    println!("PCA threshold {:.5}, IQR ratio threshold {:.4}", th.value, iqr.ratio_threshold.value);

    for (label, anomalous) in [("healthy", false), ("anomalous", true)] {
        let eval: Vec<_> = sp.eval.samples.iter().filter(|s| s.is_anomaly == anomalous).cloned().collect();
        let vs = vectors(&eval);
        let pca_hits = vs.iter().filter(|v| pca_score(&pca, v).unwrap() > th.value).count();
        let iqr_hits = vs.iter().filter(|v| iqr_classify(&iqr, v).unwrap()).count();
        let mean_ratio = vs.iter().map(|v| outlier_ratio(&iqr, v).unwrap()).sum::<f64>() / vs.len() as f64;
        println!(
            "{label:>9} windows {:>4}: PCA above {:>4}, IQR above {:>4}, mean outlier ratio {mean_ratio:.4}",
            vs.len(),
            pca_hits,
            iqr_hits
        );
    }
    Ok(())
}
