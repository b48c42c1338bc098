//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance run. Nothing here calls the library routine it checks.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use iiot_anomaly::dataset::{Dataset, GeneratorConfig};
use iiot_anomaly::harness::{DatasetSource, DetectorConfig, DetectorState, ExperimentConfig};
use iiot_anomaly::nn::TrainConfig;
use iiot_anomaly::rng::SplitMix64;
use iiot_anomaly::signal::FeatureSetId;

/// `|DFT(x)[k]| / N` for `k < N/2`, summed directly.
pub fn naive_dft_magnitude(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &v) in x.iter().enumerate() {
                // Reduce jk mod n first so the angle stays small and exact.
                let angle = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
                re += v * angle.cos();
                im += v * angle.sin();
            }
            re.hypot(im) / n as f64
        })
        .collect()
}

/// Sample covariance with divisor `n - 1`, computed column by column.
pub fn brute_covariance(data: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = data.len() as f64;
    let d = data[0].len();
    let mean: Vec<f64> = (0..d).map(|j| data.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for (a, row) in cov.iter_mut().enumerate() {
        for (b, c) in row.iter_mut().enumerate() {
            *c = data.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (n - 1.0);
        }
    }
    cov
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues descending and matching unit eigenvectors, each flipped so its
/// largest-magnitude entry is positive.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = a.len();
    let mut v: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| f64::from(i == j)).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let col: Vec<f64> = v.iter().map(|row| row[i]).collect();
            let big = col.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            col.iter().map(|x| if big < 0.0 { -x } else { *x }).collect()
        })
        .collect();
    (values, vectors)
}

/// `n` points in 5-D with well separated per-axis scales, mixed by a fixed
/// rotation so the principal axes are not the coordinate axes.
pub fn pca_fixture(seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut rng = SplitMix64::new(seed);
    let scales = [5.0, 3.0, 2.0, 1.0, 0.5];
    let mix: Vec<Vec<f64>> = (0..5).map(|_| (0..5).map(|_| rng.normal()).collect()).collect();
    (0..n)
        .map(|_| {
            let z: Vec<f64> = scales.iter().map(|s| s * rng.normal()).collect();
            (0..5)
                .map(|i| (0..5).map(|j| mix[i][j] * z[j]).sum::<f64>() + i as f64)
                .collect()
        })
        .collect()
}

/// `(tp, fp, tn, fn)` counted one pair at a time.
pub fn confusion(predicted: &[bool], truth: &[bool]) -> (usize, usize, usize, usize) {
    let mut c = (0, 0, 0, 0);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => c.0 += 1,
            (true, false) => c.1 += 1,
            (false, false) => c.2 += 1,
            (false, true) => c.3 += 1,
        }
    }
    c
}

/// `(accuracy, precision, recall, f1)` with 0 for empty denominators.
pub fn brute_metrics(predicted: &[bool], truth: &[bool]) -> (f64, f64, f64, f64) {
    let (tp, fp, tn, fn_) = confusion(predicted, truth);
    let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = div(tp, tp + fp);
    let recall = div(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (div(tp + tn, tp + fp + tn + fn_), precision, recall, f1)
}

/// Random 3×3 orthogonal matrix from Gram-Schmidt on Gaussian columns;
/// reflections are as likely as rotations.
pub fn random_orthogonal(rng: &mut SplitMix64) -> [[f64; 3]; 3] {
    let mut basis: Vec<[f64; 3]> = Vec::new();
    while basis.len() < 3 {
        let mut v = [rng.normal(), rng.normal(), rng.normal()];
        for b in &basis {
            let d: f64 = (0..3).map(|i| v[i] * b[i]).sum();
            for i in 0..3 {
                v[i] -= d * b[i];
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            basis.push(v.map(|x| x / norm));
        }
    }
    std::array::from_fn(|i| std::array::from_fn(|j| basis[j][i]))
}

/// Every sample with its vibration axes mixed by its own random orthogonal
/// matrix.
pub fn rotate_dataset(ds: &Dataset, seed: u64) -> Dataset {
    let mut rng = SplitMix64::new(seed);
    let mut out = ds.clone();
    for s in &mut out.samples {
        let m = random_orthogonal(&mut rng);
        s.rotate_vibration(&m);
    }
    out
}

/// Every anomalous sample with each signal and its temperature set to NaN.
pub fn poison_anomalies(ds: &Dataset) -> Dataset {
    let mut out = ds.clone();
    for s in out.samples.iter_mut().filter(|s| s.is_anomaly) {
        for ch in [&mut s.audio, &mut s.vib_x, &mut s.vib_y, &mut s.vib_z] {
            ch.iter_mut().for_each(|v| *v = f64::NAN);
        }
        s.temperature = f64::NAN;
    }
    out
}

pub fn epochs(max_epochs: usize) -> TrainConfig {
    TrainConfig {
        max_epochs,
        ..TrainConfig::default()
    }
}

/// All five detectors on every feature set, with short training.
pub fn quick_config(n_samples_per_condition: usize, max_epochs: usize) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSource::Generate(GeneratorConfig {
            n_samples_per_condition,
            seed: 7,
            ..GeneratorConfig::default()
        }),
        detectors: vec![
            DetectorConfig::Dnn { n: 64, train: None },
            DetectorConfig::Lstm { n: 16, train: None },
            DetectorConfig::Cnn { bottleneck: 16, train: None },
            DetectorConfig::BmPca { variance_target: 0.95 },
            DetectorConfig::BmIqr {},
        ],
        feature_sets: FeatureSetId::ALL.to_vec(),
        train: epochs(max_epochs),
        ..ExperimentConfig::default()
    }
}

/// The separable end-to-end fixture: 500 samples, half of them anomalous,
/// with the hyperparameters recorded for the detection check.
pub fn separable_config() -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSource::Generate(GeneratorConfig {
            n_samples_per_condition: 100,
            anomaly_fraction: 0.5,
            anomaly_harmonic_gain: 1.5,
            anomaly_noise_gain: 2.0,
            seed: 0,
            ..GeneratorConfig::default()
        }),
        detectors: vec![
            DetectorConfig::Dnn { n: 150, train: Some(epochs(20)) },
            DetectorConfig::Lstm { n: 32, train: Some(epochs(3)) },
            DetectorConfig::Cnn { bottleneck: 32, train: Some(epochs(3)) },
            DetectorConfig::BmPca { variance_target: 0.95 },
            DetectorConfig::BmIqr {},
        ],
        ..ExperimentConfig::default()
    }
}

/// Serialized states keyed by `DETECTOR_FEATURESET`.
pub fn state_bytes(states: &[(DetectorState, f64)]) -> BTreeMap<String, String> {
    states
        .iter()
        .map(|(s, _)| (format!("{}_{}", s.detector, s.feature_set), s.to_json().unwrap()))
        .collect()
}

/// Every file under `dir` except wall-clock runtimes, keyed by relative path.
pub fn output_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if !path.file_name().unwrap().to_string_lossy().contains("runtime") {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}
