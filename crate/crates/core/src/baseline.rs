//! Statistical benchmarks: PCA reconstruction error and the mean ± 1.5·IQR
//! fence.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::detect::{calibrate_threshold, Threshold};
use crate::error::{Error, Result};

pub const DEFAULT_VARIANCE_TARGET: f64 = 0.95;
pub const IQR_FENCE: f64 = 1.5;

fn check_vectors(vectors: &[Vec<f64>], min: usize, what: &str) -> Result<usize> {
    if vectors.len() < min {
        return Err(Error::config(format!(
            "{what} needs at least {min} vectors, got {}",
            vectors.len()
        )));
    }
    let d = vectors[0].len();
    if d == 0 {
        return Err(Error::shape(format!("{what} on zero-dimensional vectors")));
    }
    if let Some((i, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != d) {
        return Err(Error::shape(format!(
            "{what}: vector {i} has dimension {}, expected {d}",
            v.len()
        )));
    }
    Ok(d)
}

fn check_dim(v: &[f64], d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::shape(format!("vector has dimension {}, model expects {d}", v.len())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows of length `d`, by descending eigenvalue.
    pub components: Vec<Vec<f64>>,
    pub k: usize,
    pub explained_variance_ratio: f64,
    /// Every covariance eigenvalue, descending, clamped at 0.
    pub eigenvalues: Vec<f64>,
}

/// Full eigendecomposition of the sample covariance, sorted and
/// sign-normalized.
struct Spectrum {
    mean: Vec<f64>,
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

fn spectrum(train: &[Vec<f64>]) -> Result<Spectrum> {
    let d = check_vectors(train, 2, "PCA fit")?;
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    for v in train {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let cov = covariance(train, &mean);
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &cov));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = order
        .iter()
        .map(|&i| normalize_sign(eig.eigenvectors.column(i).iter().copied().collect()))
        .collect();
    Ok(Spectrum {
        mean,
        values,
        vectors,
    })
}

/// Row-major `d × d` covariance with divisor `n - 1`.
pub fn covariance(train: &[Vec<f64>], mean: &[f64]) -> Vec<f64> {
    let d = mean.len();
    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for v in train {
        for ((c, x), m) in centered.iter_mut().zip(v).zip(mean) {
            *c = x - m;
        }
        for i in 0..d {
            let ci = centered[i];
            for j in i..d {
                cov[i * d + j] += ci * centered[j];
            }
        }
    }
    let denom = (train.len() - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let c = cov[i * d + j] / denom;
            cov[i * d + j] = c;
            cov[j * d + i] = c;
        }
    }
    cov
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub fn normalize_sign(mut v: Vec<f64>) -> Vec<f64> {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Keeps the fewest components whose cumulative explained variance reaches
/// `variance_target`.
pub fn pca_fit(train: &[Vec<f64>], variance_target: f64) -> Result<PcaModel> {
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::config(format!(
            "variance_target {variance_target} outside (0, 1]"
        )));
    }
    let s = spectrum(train)?;
    let total: f64 = s.values.iter().sum();
    let k = if total > 0.0 {
        let mut cum = 0.0;
        let mut k = s.values.len();
        for (i, v) in s.values.iter().enumerate() {
            cum += v;
            if cum >= variance_target * total {
                k = i + 1;
                break;
            }
        }
        k
    } else {
        1
    };
    Ok(build_pca(s, k))
}

/// PCA with exactly `k` components.
pub fn pca_fit_k(train: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let s = spectrum(train)?;
    if k < 1 || k > s.values.len() {
        return Err(Error::config(format!(
            "k = {k} outside [1, {}]",
            s.values.len()
        )));
    }
    Ok(build_pca(s, k))
}

fn build_pca(s: Spectrum, k: usize) -> PcaModel {
    let total: f64 = s.values.iter().sum();
    let kept: f64 = s.values[..k].iter().sum();
    PcaModel {
        mean: s.mean,
        components: s.vectors.into_iter().take(k).collect(),
        k,
        explained_variance_ratio: if total > 0.0 { kept / total } else { 1.0 },
        eigenvalues: s.values,
    }
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `mean + Pᵀ P (v - mean)`
    pub fn reconstruct(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(v, self.dim())?;
        let centered: Vec<f64> = v.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        let mut out = self.mean.clone();
        for p in &self.components {
            let coef = crate::tensor::dot(p, &centered);
            crate::tensor::axpy(coef, p, &mut out);
        }
        Ok(out)
    }
}

/// Mean squared residual `‖v - reconstruct(v)‖² / d`.
pub fn pca_score(m: &PcaModel, v: &[f64]) -> Result<f64> {
    let r = m.reconstruct(v)?;
    let sq: f64 = v.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sq / v.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqrModel {
    pub mean: Vec<f64>,
    pub iqr: Vec<f64>,
    pub fence_multiplier: f64,
    /// Cut on the outlier ratio, calibrated like the autoencoder thresholds.
    pub ratio_threshold: Threshold,
}

/// Quantile by linear interpolation between order statistics of `sorted`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-dimension mean and interquartile range from `train`, ratio cut from
/// the outlier ratios of `calibration`.
pub fn iqr_fit(train: &[Vec<f64>], calibration: &[Vec<f64>]) -> Result<IqrModel> {
    let (mean, iqr) = iqr_fences(train)?;
    let mut m = IqrModel {
        mean,
        iqr,
        fence_multiplier: IQR_FENCE,
        ratio_threshold: Threshold {
            value: 0.0,
            mean: 0.0,
            std: 0.0,
            calibration_count: 0,
        },
    };
    let ratios = calibration
        .iter()
        .map(|v| outlier_ratio(&m, v))
        .collect::<Result<Vec<_>>>()?;
    m.ratio_threshold = calibrate_threshold(&ratios)?;
    Ok(m)
}

/// Per-dimension `(mean, iqr)`.
pub fn iqr_fences(train: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = check_vectors(train, 4, "IQR fit")?;
    let n = train.len() as f64;
    let mut mean = Vec::with_capacity(d);
    let mut iqr = Vec::with_capacity(d);
    let mut column = vec![0.0; train.len()];
    for j in 0..d {
        for (c, v) in column.iter_mut().zip(train) {
            *c = v[j];
        }
        mean.push(column.iter().sum::<f64>() / n);
        column.sort_by(f64::total_cmp);
        iqr.push((quantile(&column, 0.75) - quantile(&column, 0.25)).max(0.0));
    }
    Ok((mean, iqr))
}

/// Fraction of dimensions outside `[mean - 1.5·iqr, mean + 1.5·iqr]`.
pub fn outlier_ratio(m: &IqrModel, v: &[f64]) -> Result<f64> {
    check_dim(v, m.mean.len())?;
    let outside = v
        .iter()
        .zip(m.mean.iter().zip(&m.iqr))
        .filter(|(x, (mu, q))| {
            let half = m.fence_multiplier * *q;
            **x < *mu - half || **x > *mu + half
        })
        .count();
    Ok(outside as f64 / v.len() as f64)
}

pub fn iqr_classify(m: &IqrModel, v: &[f64]) -> Result<bool> {
    Ok(outlier_ratio(m, v)? > m.ratio_threshold.value)
}
