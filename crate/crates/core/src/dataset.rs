//! Sensor sample schema, the synthetic pump-signal generator, JSON-Lines
//! dataset files and the healthy-only split policy.
//!
//! A sample is one acquisition of the multi-sensor tag: 1024 points of
//! audio (16 kHz), 1024 points on each of three vibration axes (6664 Hz)
//! and one temperature reading, tagged with the pump drive frequency.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const SAMPLE_LEN: usize = 1024;
pub const AUDIO_RATE_HZ: f64 = 16_000.0;
pub const VIBRATION_RATE_HZ: f64 = 6_664.0;
pub const OPERATING_FREQUENCIES_HZ: [u32; 5] = [50, 100, 150, 200, 250];

const FORMAT_TAG: &str = "iiot-anomaly/dataset-v1";
const BASE_TIMESTAMP: i64 = 1_600_000_000;
const ACQUISITION_PERIOD_S: i64 = 60;

/// One 60-second acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSample {
    pub sample_id: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub audio: Vec<f64>,
    pub vib_x: Vec<f64>,
    pub vib_y: Vec<f64>,
    pub vib_z: Vec<f64>,
    /// Degrees Celsius.
    pub temperature: f64,
    pub operating_freq_hz: u32,
    pub is_anomaly: bool,
    pub rotation_tag: bool,
    pub tube_id: u32,
}

impl SensorSample {
    pub fn channels(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("audio", &self.audio),
            ("vib_x", &self.vib_x),
            ("vib_y", &self.vib_y),
            ("vib_z", &self.vib_z),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, values) in self.channels() {
            if values.len() != SAMPLE_LEN {
                return Err(Error::shape(format!(
                    "sample {}: channel {name} has {} values, expected {SAMPLE_LEN}",
                    self.sample_id,
                    values.len()
                )));
            }
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::shape(format!(
                    "sample {}: channel {name} has a non-finite value at index {i}",
                    self.sample_id
                )));
            }
        }
        if !OPERATING_FREQUENCIES_HZ.contains(&self.operating_freq_hz) {
            return Err(Error::shape(format!(
                "sample {}: operating frequency {} Hz is not one of {:?}",
                self.sample_id, self.operating_freq_hz, OPERATING_FREQUENCIES_HZ
            )));
        }
        Ok(())
    }

    /// Applies a 3×3 matrix to the vibration axes at every time index and
    /// marks the sample as remounted.
    pub fn rotate_vibration(&mut self, m: &[[f64; 3]; 3]) {
        for t in 0..self.vib_x.len() {
            let v = [self.vib_x[t], self.vib_y[t], self.vib_z[t]];
            let r: [f64; 3] =
                std::array::from_fn(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2]);
            self.vib_x[t] = r[0];
            self.vib_y[t] = r[1];
            self.vib_z[t] = r[2];
        }
        self.rotation_tag = true;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Synthetic,
    File,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<SensorSample>,
    pub provenance: Provenance,
    pub generator_seed: Option<u64>,
}

impl Dataset {
    pub fn new(samples: Vec<SensorSample>, provenance: Provenance) -> Result<Self> {
        let ds = Self {
            samples,
            provenance,
            generator_seed: None,
        };
        ds.validate_ids()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn healthy_count(&self) -> usize {
        self.samples.iter().filter(|s| !s.is_anomaly).count()
    }

    pub fn anomaly_count(&self) -> usize {
        self.samples.iter().filter(|s| s.is_anomaly).count()
    }

    fn validate_ids(&self) -> Result<()> {
        for pair in self.samples.windows(2) {
            if pair[1].sample_id <= pair[0].sample_id {
                return Err(Error::shape(format!(
                    "sample ids must be strictly increasing: {} follows {}",
                    pair[1].sample_id, pair[0].sample_id
                )));
            }
        }
        Ok(())
    }

    fn subset(&self, mut samples: Vec<SensorSample>) -> Dataset {
        samples.sort_by_key(|s| s.sample_id);
        Dataset {
            samples,
            provenance: self.provenance,
            generator_seed: self.generator_seed,
        }
    }
}

/// Parameters of the synthetic pump-signal model.
///
/// Every channel is a sum of `harmonic_count` sinusoids at multiples of the
/// drive frequency with amplitudes `base_amplitude * axis_gain / h` and a
/// per-sample random phase, plus white Gaussian noise. An anomalous
/// (flow-restricted) sample scales the 2nd harmonic by
/// `anomaly_harmonic_gain` and the noise by `anomaly_noise_gain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_samples_per_condition: usize,
    pub anomaly_fraction: f64,
    pub base_amplitude: f64,
    pub harmonic_count: usize,
    pub noise_std: f64,
    pub anomaly_harmonic_gain: f64,
    pub anomaly_noise_gain: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_samples_per_condition: 100,
            anomaly_fraction: 0.5,
            base_amplitude: 1.0,
            harmonic_count: 4,
            noise_std: 2.0,
            anomaly_harmonic_gain: 1.5,
            anomaly_noise_gain: 2.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples_per_condition < 1 {
            return Err(Error::config("n_samples_per_condition must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.anomaly_fraction) {
            return Err(Error::config("anomaly_fraction must lie in [0, 1]"));
        }
        if !(self.base_amplitude.is_finite() && self.base_amplitude >= 0.0) {
            return Err(Error::config("base_amplitude must be finite and >= 0"));
        }
        if self.harmonic_count < 1 {
            return Err(Error::config("harmonic_count must be >= 1"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::config("noise_std must be finite and >= 0"));
        }
        for (name, gain) in [
            ("anomaly_harmonic_gain", self.anomaly_harmonic_gain),
            ("anomaly_noise_gain", self.anomaly_noise_gain),
        ] {
            if !(gain.is_finite() && gain > 0.0) {
                return Err(Error::config(format!("{name} must be > 0")));
            }
        }
        Ok(())
    }

    /// Anomalous samples per operating condition, `round(fraction * n)`.
    pub fn anomalies_per_condition(&self) -> usize {
        round_half_up(self.anomaly_fraction * self.n_samples_per_condition as f64)
    }
}

/// Channel order used for stream labels and axis gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Audio = 0,
    VibX = 1,
    VibY = 2,
    VibZ = 3,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Audio, Channel::VibX, Channel::VibY, Channel::VibZ];

    pub fn sample_rate_hz(self) -> f64 {
        match self {
            Channel::Audio => AUDIO_RATE_HZ,
            _ => VIBRATION_RATE_HZ,
        }
    }

    /// Relative amplitude of the channel in the synthetic signal model.
    pub fn axis_gain(self) -> f64 {
        match self {
            Channel::Audio => 1.0,
            Channel::VibX => 1.0,
            Channel::VibY => 0.7,
            Channel::VibZ => 0.4,
        }
    }
}

const NOISE_STREAM: u64 = 0xFFFF;

/// Phase (radians) of harmonic `h` on `channel` of sample `sample_id`.
pub fn harmonic_phase(seed: u64, sample_id: u64, channel: Channel, h: usize) -> f64 {
    TAU * SplitMix64::derived(seed, &[sample_id, channel as u64, h as u64]).next_f64()
}

pub fn generate_synthetic(config: &GeneratorConfig) -> Result<Dataset> {
    config.validate()?;
    let n = config.n_samples_per_condition;
    let k = config.anomalies_per_condition();
    let mut samples = Vec::with_capacity(n * OPERATING_FREQUENCIES_HZ.len());
    for &freq in &OPERATING_FREQUENCIES_HZ {
        for j in 0..n {
            // Spread the k anomalies evenly over the n slots of the block.
            let anomalous = (j + 1) * k / n > j * k / n;
            let id = samples.len() as u64;
            samples.push(synthesize_sample(config, id, freq, anomalous));
        }
    }
    Ok(Dataset {
        samples,
        provenance: Provenance::Synthetic,
        generator_seed: Some(config.seed),
    })
}

fn synthesize_sample(cfg: &GeneratorConfig, id: u64, freq: u32, anomalous: bool) -> SensorSample {
    let channel = |ch: Channel| -> Vec<f64> {
        let rate = ch.sample_rate_hz();
        let harmonics: Vec<(f64, f64, f64)> = (1..=cfg.harmonic_count)
            .map(|h| {
                let mut amp = cfg.base_amplitude * ch.axis_gain() / h as f64;
                if anomalous && h == 2 {
                    amp *= cfg.anomaly_harmonic_gain;
                }
                let omega = TAU * freq as f64 * h as f64 / rate;
                (amp, omega, harmonic_phase(cfg.seed, id, ch, h))
            })
            .collect();
        let noise_std = if anomalous {
            cfg.noise_std * cfg.anomaly_noise_gain
        } else {
            cfg.noise_std
        };
        let mut noise = SplitMix64::derived(cfg.seed, &[id, ch as u64, NOISE_STREAM]);
        (0..SAMPLE_LEN)
            .map(|t| {
                let tone: f64 = harmonics
                    .iter()
                    .map(|&(a, w, p)| a * (w * t as f64 + p).sin())
                    .sum();
                if noise_std > 0.0 {
                    tone + noise_std * noise.normal()
                } else {
                    tone
                }
            })
            .collect()
    };
    SensorSample {
        sample_id: id,
        timestamp: BASE_TIMESTAMP + ACQUISITION_PERIOD_S * id as i64,
        audio: channel(Channel::Audio),
        vib_x: channel(Channel::VibX),
        vib_y: channel(Channel::VibY),
        vib_z: channel(Channel::VibZ),
        temperature: 30.0 + 0.002 * id as f64,
        operating_freq_hz: freq,
        is_anomaly: anomalous,
        rotation_tag: false,
        tube_id: 1,
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileHeader {
    format: String,
    provenance: Provenance,
    generator_seed: Option<u64>,
}

/// Writes one header line followed by one JSON object per sample.
pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    for s in &ds.samples {
        s.validate()?;
    }
    ds.validate_ids()?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let header = FileHeader {
        format: FORMAT_TAG.to_string(),
        provenance: ds.provenance,
        generator_seed: ds.generator_seed,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    for s in &ds.samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a dataset file. The header line is optional: a file holding only
/// sample lines loads with provenance `file`.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut provenance = Provenance::File;
    let mut generator_seed = None;
    let mut samples: Vec<SensorSample> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        if samples.is_empty() && line_no == 1 && trimmed.contains("\"format\"") {
            let header: FileHeader =
                serde_json::from_str(trimmed).map_err(|e| parse_err(e.to_string()))?;
            if header.format != FORMAT_TAG {
                return Err(parse_err(format!("unsupported format tag {:?}", header.format)));
            }
            provenance = header.provenance;
            generator_seed = header.generator_seed;
            continue;
        }
        let sample: SensorSample =
            serde_json::from_str(trimmed).map_err(|e| parse_err(e.to_string()))?;
        sample.validate().map_err(|e| parse_err(e.to_string()))?;
        if let Some(prev) = samples.last() {
            if sample.sample_id <= prev.sample_id {
                return Err(parse_err(format!(
                    "sample_id {} does not increase (previous {})",
                    sample.sample_id, prev.sample_id
                )));
            }
        }
        samples.push(sample);
    }
    Ok(Dataset {
        samples,
        provenance,
        generator_seed,
    })
}

/// Fractions of the HEALTHY samples assigned to training, threshold
/// calibration and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub threshold_frac: f64,
    pub eval_frac: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.6,
            threshold_frac: 0.2,
            eval_frac: 0.2,
        }
    }
}

impl SplitSpec {
    pub fn new(train_frac: f64, threshold_frac: f64, eval_frac: f64) -> Result<Self> {
        let spec = Self {
            train_frac,
            threshold_frac,
            eval_frac,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.threshold_frac, self.eval_frac];
        if fracs.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::config("split fractions must be positive"));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Threshold,
    Eval,
}

impl fmt::Display for SplitRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitRole::Train => "train",
            SplitRole::Threshold => "threshold",
            SplitRole::Eval => "eval",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub threshold: Dataset,
    pub eval: Dataset,
}

impl Split {
    /// Split membership of every sample, keyed by sample id.
    pub fn roles(&self) -> BTreeMap<u64, SplitRole> {
        let mut roles = BTreeMap::new();
        for (ds, role) in [
            (&self.train, SplitRole::Train),
            (&self.threshold, SplitRole::Threshold),
            (&self.eval, SplitRole::Eval),
        ] {
            for s in &ds.samples {
                roles.insert(s.sample_id, role);
            }
        }
        roles
    }
}

/// Partitions `ds`: healthy samples are shuffled within each operating
/// condition and divided by `spec`; every anomalous sample goes to eval.
///
/// Per condition with `m` healthy samples, train gets `round(train_frac*m)`
/// and threshold `round(threshold_frac*m)` (capped at what is left); the
/// remainder is evaluated.
pub fn split(ds: &Dataset, spec: &SplitSpec, seed: u64) -> Result<Split> {
    spec.validate()?;
    let healthy = ds.healthy_count();
    if healthy < 3 {
        return Err(Error::Split(format!(
            "need at least 3 healthy samples, found {healthy}"
        )));
    }
    let mut by_condition: BTreeMap<u32, Vec<&SensorSample>> = BTreeMap::new();
    for s in ds.samples.iter().filter(|s| !s.is_anomaly) {
        by_condition.entry(s.operating_freq_hz).or_default().push(s);
    }
    let mut rng = SplitMix64::new(seed);
    let (mut train, mut threshold, mut eval) = (Vec::new(), Vec::new(), Vec::new());
    for group in by_condition.values_mut() {
        rng.shuffle(group);
        let m = group.len();
        let n_train = round_half_up(spec.train_frac * m as f64).min(m);
        let n_threshold = round_half_up(spec.threshold_frac * m as f64).min(m - n_train);
        for (i, s) in group.iter().enumerate() {
            let dest = if i < n_train {
                &mut train
            } else if i < n_train + n_threshold {
                &mut threshold
            } else {
                &mut eval
            };
            dest.push((*s).clone());
        }
    }
    if train.is_empty() || threshold.is_empty() {
        return Err(Error::Split(format!(
            "split of {healthy} healthy samples leaves train={} threshold={}",
            train.len(),
            threshold.len()
        )));
    }
    eval.extend(ds.samples.iter().filter(|s| s.is_anomaly).cloned());
    Ok(Split {
        train: ds.subset(train),
        threshold: ds.subset(threshold),
        eval: ds.subset(eval),
    })
}

pub(crate) fn round_half_up(v: f64) -> usize {
    (v + 0.5).floor().max(0.0) as usize
}
