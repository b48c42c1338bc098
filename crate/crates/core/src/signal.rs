//! Feature assembly: the eight feature sets, train-fitted min-max
//! normalization and fixed-size windowing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::SensorSample;
use crate::error::{Error, Result};
pub use crate::fft::fft_magnitude;
use crate::tensor::Tensor;

pub const WINDOW_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeatureSetId {
    #[serde(rename = "VIB1D")]
    Vib1d,
    Audio,
    #[serde(rename = "VIB3D")]
    Vib3d,
    #[serde(rename = "VIB1D_AUDIO")]
    Vib1dAudio,
    #[serde(rename = "FFT_VIB1D")]
    FftVib1d,
    FftAudio,
    #[serde(rename = "FFT_VIB3D")]
    FftVib3d,
    #[serde(rename = "FFT_VIB1D_AUDIO")]
    FftVib1dAudio,
}

impl FeatureSetId {
    /// Report order.
    pub const ALL: [FeatureSetId; 8] = [
        FeatureSetId::Vib1d,
        FeatureSetId::Audio,
        FeatureSetId::Vib3d,
        FeatureSetId::Vib1dAudio,
        FeatureSetId::FftVib1d,
        FeatureSetId::FftAudio,
        FeatureSetId::FftVib3d,
        FeatureSetId::FftVib1dAudio,
    ];

    pub fn key(self) -> &'static str {
        match self {
            FeatureSetId::Vib1d => "VIB1D",
            FeatureSetId::Audio => "AUDIO",
            FeatureSetId::Vib3d => "VIB3D",
            FeatureSetId::Vib1dAudio => "VIB1D_AUDIO",
            FeatureSetId::FftVib1d => "FFT_VIB1D",
            FeatureSetId::FftAudio => "FFT_AUDIO",
            FeatureSetId::FftVib3d => "FFT_VIB3D",
            FeatureSetId::FftVib1dAudio => "FFT_VIB1D_AUDIO",
        }
    }

    /// Row label used in rendered tables.
    pub fn display_name(self) -> &'static str {
        match self {
            FeatureSetId::Vib1d => "Vibrations 1D",
            FeatureSetId::Audio => "Audio",
            FeatureSetId::Vib3d => "Vibrations 3D",
            FeatureSetId::Vib1dAudio => "Vibrations 1D & Audio",
            FeatureSetId::FftVib1d => "FFT Vibrations 1D",
            FeatureSetId::FftAudio => "FFT Audio",
            FeatureSetId::FftVib3d => "FFT Vibrations 3D",
            FeatureSetId::FftVib1dAudio => "FFT Vibrations 1D & Audio",
        }
    }

    pub fn is_fft(self) -> bool {
        matches!(
            self,
            FeatureSetId::FftVib1d
                | FeatureSetId::FftAudio
                | FeatureSetId::FftVib3d
                | FeatureSetId::FftVib1dAudio
        )
    }

    pub fn channel_names(self) -> &'static [&'static str] {
        match self {
            FeatureSetId::Vib1d | FeatureSetId::FftVib1d => &["vib_norm"],
            FeatureSetId::Audio | FeatureSetId::FftAudio => &["audio"],
            FeatureSetId::Vib3d | FeatureSetId::FftVib3d => &["vib_x", "vib_y", "vib_z"],
            FeatureSetId::Vib1dAudio | FeatureSetId::FftVib1dAudio => &["vib_norm", "audio"],
        }
    }

    pub fn channel_count(self) -> usize {
        self.channel_names().len()
    }

    /// Positions per channel for a 1024-point sample.
    pub fn length(self) -> usize {
        if self.is_fft() {
            crate::dataset::SAMPLE_LEN / 2
        } else {
            crate::dataset::SAMPLE_LEN
        }
    }
}

impl fmt::Display for FeatureSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for FeatureSetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureSetId::ALL
            .into_iter()
            .find(|f| f.key().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown feature set {s:?}")))
    }
}

/// `channels × length` features of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub sample_id: u64,
    pub feature_set: FeatureSetId,
    pub channel_names: Vec<String>,
    pub values: Tensor,
}

impl FeatureMatrix {
    pub fn channels(&self) -> usize {
        self.values.rows()
    }

    pub fn length(&self) -> usize {
        self.values.cols()
    }
}

/// Per-time-index euclidean norm of the three vibration axes.
pub fn vib_norm(x: &[f64], y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() || x.len() != z.len() {
        return Err(Error::shape(format!(
            "vibration axes differ in length: {} / {} / {}",
            x.len(),
            y.len(),
            z.len()
        )));
    }
    Ok(x.iter()
        .zip(y)
        .zip(z)
        .map(|((a, b), c)| (a * a + b * b + c * c).sqrt())
        .collect())
}

pub fn assemble_features(sample: &SensorSample, fs: FeatureSetId) -> Result<FeatureMatrix> {
    let raw: Vec<Vec<f64>> = match fs {
        FeatureSetId::Vib1d | FeatureSetId::FftVib1d => {
            vec![vib_norm(&sample.vib_x, &sample.vib_y, &sample.vib_z)?]
        }
        FeatureSetId::Audio | FeatureSetId::FftAudio => vec![sample.audio.clone()],
        FeatureSetId::Vib3d | FeatureSetId::FftVib3d => {
            vec![sample.vib_x.clone(), sample.vib_y.clone(), sample.vib_z.clone()]
        }
        FeatureSetId::Vib1dAudio | FeatureSetId::FftVib1dAudio => vec![
            vib_norm(&sample.vib_x, &sample.vib_y, &sample.vib_z)?,
            sample.audio.clone(),
        ],
    };
    let rows = if fs.is_fft() {
        raw.iter()
            .map(|ch| fft_magnitude(ch))
            .collect::<Result<Vec<_>>>()?
    } else {
        raw
    };
    Ok(FeatureMatrix {
        sample_id: sample.sample_id,
        feature_set: fs,
        channel_names: fs.channel_names().iter().map(|s| s.to_string()).collect(),
        values: Tensor::from_rows(&rows)?,
    })
}

/// Per-channel `(min, max)` pooled over every position of every train matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub ranges: Vec<(f64, f64)>,
}

pub fn fit_normalizer(train: &[FeatureMatrix]) -> Result<Normalizer> {
    let first = train
        .first()
        .ok_or_else(|| Error::shape("cannot fit a normalizer on an empty train set"))?;
    let channels = first.channels();
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); channels];
    for fm in train {
        if fm.channels() != channels || fm.length() != first.length() {
            return Err(Error::shape(format!(
                "train matrix for sample {} is {}x{}, expected {}x{}",
                fm.sample_id,
                fm.channels(),
                fm.length(),
                channels,
                first.length()
            )));
        }
        for (c, range) in ranges.iter_mut().enumerate() {
            for &v in fm.values.row(c) {
                range.0 = range.0.min(v);
                range.1 = range.1.max(v);
            }
        }
    }
    Ok(Normalizer { ranges })
}

impl Normalizer {
    /// `(v - min) / (max - min)` per channel, not clipped; a channel whose
    /// train range is degenerate maps to 0.
    pub fn apply(&self, fm: &FeatureMatrix) -> Result<FeatureMatrix> {
        if fm.channels() != self.ranges.len() {
            return Err(Error::shape(format!(
                "normalizer has {} channels, matrix has {}",
                self.ranges.len(),
                fm.channels()
            )));
        }
        let mut out = fm.clone();
        for (c, &(lo, hi)) in self.ranges.iter().enumerate() {
            let span = hi - lo;
            for v in out.values.row_mut(c) {
                *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
            }
        }
        Ok(out)
    }
}

pub fn apply_normalizer(nz: &Normalizer, fm: &FeatureMatrix) -> Result<FeatureMatrix> {
    nz.apply(fm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub sample_id: u64,
    pub window_index: usize,
    /// `channels × window_size`
    pub values: Tensor,
}

impl Window {
    /// Channels concatenated into one row, channel-major.
    pub fn to_flat(&self) -> Tensor {
        Tensor::row_vector(self.values.as_slice().to_vec())
    }

    /// `time × channels`.
    pub fn to_sequence(&self) -> Tensor {
        self.values.transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    pub windows: Vec<Window>,
    pub window_size: usize,
    pub stride: usize,
}

impl WindowBatch {
    pub fn empty(window_size: usize, stride: usize) -> Self {
        Self {
            windows: Vec::new(),
            window_size,
            stride,
        }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn extend(&mut self, other: WindowBatch) {
        self.windows.extend(other.windows);
    }
}

/// Slices `[i*stride, i*stride + size)` of every channel; a trailing
/// remainder shorter than `size` is dropped.
pub fn window(fm: &FeatureMatrix, size: usize, stride: usize) -> Result<WindowBatch> {
    if size == 0 || stride == 0 {
        return Err(Error::config("window size and stride must be positive"));
    }
    let len = fm.length();
    if len < size {
        return Err(Error::shape(format!(
            "sample {}: length {len} is shorter than the window size {size}",
            fm.sample_id
        )));
    }
    let count = (len - size) / stride + 1;
    let channels = fm.channels();
    let windows = (0..count)
        .map(|i| {
            let start = i * stride;
            let mut data = Vec::with_capacity(channels * size);
            for c in 0..channels {
                data.extend_from_slice(&fm.values.row(c)[start..start + size]);
            }
            Window {
                sample_id: fm.sample_id,
                window_index: i,
                values: Tensor::from_vec(channels, size, data).expect("window shape"),
            }
        })
        .collect();
    Ok(WindowBatch {
        windows,
        window_size: size,
        stride,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, GeneratorConfig};
    use crate::rng::SplitMix64;

    fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        FeatureMatrix {
            sample_id: 0,
            feature_set: FeatureSetId::Vib1d,
            channel_names: vec![],
            values: Tensor::from_rows(&rows).unwrap(),
        }
    }

    #[test]
    fn vib_norm_triple_and_zero() {
        let out = vib_norm(&[3.0; 8], &[4.0; 8], &[0.0; 8]).unwrap();
        assert!(out.iter().all(|&v| v == 5.0));
        let zero = vib_norm(&[0.0; 4], &[0.0; 4], &[0.0; 4]).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        assert!(vib_norm(&[0.0; 4], &[0.0; 3], &[0.0; 4]).is_err());
    }

    #[test]
    fn feature_shapes() {
        let ds = generate_synthetic(&GeneratorConfig {
            n_samples_per_condition: 1,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let s = &ds.samples[3];
        for fs in FeatureSetId::ALL {
            let fm = assemble_features(s, fs).unwrap();
            assert_eq!(fm.channels(), fs.channel_count(), "{fs}");
            assert_eq!(fm.length(), if fs.is_fft() { 512 } else { 1024 }, "{fs}");
        }
        let v3 = assemble_features(s, FeatureSetId::Vib3d).unwrap();
        assert_eq!(v3.values.row(0), &s.vib_x[..]);
        assert_eq!(v3.values.row(2), &s.vib_z[..]);
        let combo = assemble_features(s, FeatureSetId::FftVib1dAudio).unwrap();
        let norm = vib_norm(&s.vib_x, &s.vib_y, &s.vib_z).unwrap();
        assert_eq!(combo.values.row(0), &fft_magnitude(&norm).unwrap()[..]);
        assert_eq!(combo.values.row(1), &fft_magnitude(&s.audio).unwrap()[..]);
    }

    #[test]
    fn zero_audio_gives_zero_matrix() {
        let mut s = generate_synthetic(&GeneratorConfig {
            n_samples_per_condition: 1,
            ..GeneratorConfig::default()
        })
        .unwrap()
        .samples
        .remove(0);
        s.audio = vec![0.0; 1024];
        let fm = assemble_features(&s, FeatureSetId::Audio).unwrap();
        assert_eq!(fm.values.shape(), (1, 1024));
        assert!(fm.values.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalizer_contract() {
        let nz = fit_normalizer(&[matrix(vec![vec![0.0, 10.0], vec![3.0, 3.0]])]).unwrap();
        let out = nz.apply(&matrix(vec![vec![5.0, 15.0], vec![7.0, -1.0]])).unwrap();
        assert_eq!(out.values.row(0), &[0.5, 1.5]);
        assert_eq!(out.values.row(1), &[0.0, 0.0]);
        assert!(nz.apply(&matrix(vec![vec![1.0, 2.0]])).is_err());
        assert!(fit_normalizer(&[]).is_err());
    }

    #[test]
    fn normalizer_pools_over_samples() {
        let a = matrix(vec![vec![1.0, 2.0]]);
        let b = matrix(vec![vec![-1.0, 4.0]]);
        let nz = fit_normalizer(&[a, b]).unwrap();
        assert_eq!(nz.ranges, vec![(-1.0, 4.0)]);
    }

    #[test]
    fn window_counts() {
        let mut rng = SplitMix64::new(1);
        let mk = |c: usize, n: usize, rng: &mut SplitMix64| {
            matrix((0..c).map(|_| (0..n).map(|_| rng.next_f64()).collect()).collect())
        };
        let b = window(&mk(1, 1024, &mut rng), 64, 64).unwrap();
        assert_eq!(b.len(), 16);
        assert!(b.windows.iter().all(|w| w.values.shape() == (1, 64)));
        let b = window(&mk(2, 512, &mut rng), 64, 64).unwrap();
        assert_eq!(b.len(), 8);
        assert!(b.windows.iter().all(|w| w.values.shape() == (2, 64)));
        let fm = mk(1, 100, &mut rng);
        let b = window(&fm, 64, 64).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.windows[0].values.row(0), &fm.values.row(0)[..64]);
        assert!(matches!(window(&mk(1, 63, &mut rng), 64, 64), Err(Error::Shape(_))));
    }

    #[test]
    fn window_layouts() {
        let fm = matrix(vec![(0..64).map(f64::from).collect(), (100..164).map(f64::from).collect()]);
        let w = &window(&fm, 64, 64).unwrap().windows[0];
        let flat = w.to_flat();
        assert_eq!(flat.shape(), (1, 128));
        assert_eq!(flat.get(0, 64), 100.0);
        let seq = w.to_sequence();
        assert_eq!(seq.shape(), (64, 2));
        assert_eq!(seq.row(5), &[5.0, 105.0]);
    }

    #[test]
    fn feature_set_names_roundtrip() {
        for fs in FeatureSetId::ALL {
            assert_eq!(fs.key().parse::<FeatureSetId>().unwrap(), fs);
            let json = serde_json::to_string(&fs).unwrap();
            assert_eq!(json, format!("\"{}\"", fs.key()));
        }
    }
}
