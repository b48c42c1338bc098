//! The three autoencoder recipes (fully connected, stacked LSTM and 1-D
//! convolutional) and window-level reconstruction.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, LayerSpec, Model, TrainConfig, TrainReport};
use crate::signal::{Window, WindowBatch, WINDOW_SIZE};
use crate::tensor::Tensor;

pub const DNN_N_RANGE: std::ops::RangeInclusive<usize> = 64..=200;
pub const DEFAULT_DNN_N: usize = 150;
pub const DEFAULT_LSTM_N: usize = 150;
pub const LSTM_FLOOR: usize = 16;
pub const CNN_FILTERS: [usize; 4] = [16, 32, 64, 128];
pub const DEFAULT_CNN_BOTTLENECK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArchitectureId {
    #[serde(rename = "DNN")]
    Dnn,
    #[serde(rename = "LSTM")]
    Lstm,
    #[serde(rename = "CNN")]
    Cnn,
}

impl fmt::Display for ArchitectureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArchitectureId::Dnn => "DNN",
            ArchitectureId::Lstm => "LSTM",
            ArchitectureId::Cnn => "CNN",
        })
    }
}

/// Round half up, never below 1.
pub fn round_width(v: f64) -> usize {
    ((v + 0.5).floor() as usize).max(1)
}

/// `x, n, n/3, n/4, n/3, n, x`
pub fn dnn_widths(x: usize, n: usize) -> Result<[usize; 7]> {
    if x < 1 {
        return Err(Error::config("DNN input length must be >= 1"));
    }
    if !DNN_N_RANGE.contains(&n) {
        return Err(Error::config(format!(
            "DNN width n = {n} outside [{}, {}]",
            DNN_N_RANGE.start(),
            DNN_N_RANGE.end()
        )));
    }
    let third = round_width(n as f64 / 3.0);
    let quarter = round_width(n as f64 / 4.0);
    Ok([x, n, third, quarter, third, n, x])
}

/// `n, n/2, n/4, n/16, n/16, n/4, n/2, n`, each at least [`LSTM_FLOOR`].
pub fn lstm_units(n: usize) -> Result<[usize; 8]> {
    if n < LSTM_FLOOR {
        return Err(Error::config(format!("LSTM width n = {n} is below {LSTM_FLOOR}")));
    }
    Ok([1, 2, 4, 16, 16, 4, 2, 1].map(|d| round_width(n as f64 / d as f64).max(LSTM_FLOOR)))
}

/// Six dense maps `x→n→n/3→n/4→n/3→n→x`, tanh between them, linear output.
pub fn build_dnn(x: usize, n: usize, seed: u64) -> Result<Model> {
    let widths = dnn_widths(x, n)?;
    let mut layers = Vec::new();
    for (i, &units) in widths[1..].iter().enumerate() {
        layers.push(LayerSpec::Dense { units });
        if i + 2 < widths.len() {
            layers.push(LayerSpec::Tanh);
        }
    }
    Model::new((1, x), layers, seed)
}

/// Eight stacked LSTMs with a repeat bottleneck and a per-step linear
/// projection back to `channels`.
pub fn build_lstm(n: usize, timesteps: usize, channels: usize, seed: u64) -> Result<Model> {
    if timesteps < 1 || channels < 1 {
        return Err(Error::config("LSTM timesteps and channels must be >= 1"));
    }
    let units = lstm_units(n)?;
    let mut layers = Vec::new();
    for (i, &u) in units.iter().enumerate() {
        layers.push(LayerSpec::Lstm {
            units: u,
            return_sequences: i != 3,
        });
        if i == 3 {
            layers.push(LayerSpec::RepeatLast {
                repeat_count: timesteps,
            });
        }
    }
    layers.push(LayerSpec::Dense { units: channels });
    Model::new((timesteps, channels), layers, seed)
}

/// Conv(16)/pool, conv(32)/pool, conv(64)/pool, conv(128)/pool, a dense
/// bottleneck, then the mirrored decoder with nearest-neighbour upsampling
/// and a final linear convolution to `channels`.
pub fn build_cnn(timesteps: usize, channels: usize, bottleneck: usize, seed: u64) -> Result<Model> {
    let stages = CNN_FILTERS.len();
    let reduction = 1 << stages;
    if timesteps == 0 || timesteps % reduction != 0 {
        return Err(Error::config(format!(
            "CNN timesteps {timesteps} must be a positive multiple of {reduction}"
        )));
    }
    if channels < 1 || bottleneck < 1 {
        return Err(Error::config("CNN channels and bottleneck must be >= 1"));
    }
    let conv = |filters| LayerSpec::Conv1D {
        filters,
        kernel_size: 2,
    };
    let mut layers = Vec::new();
    for &f in &CNN_FILTERS {
        layers.extend([conv(f), LayerSpec::Tanh, LayerSpec::MaxPool1D { pool_size: 2 }]);
    }
    let (rows, cols) = (timesteps / reduction, CNN_FILTERS[stages - 1]);
    layers.extend([
        LayerSpec::Flatten,
        LayerSpec::Dense { units: bottleneck },
        LayerSpec::Tanh,
        LayerSpec::Dense { units: rows * cols },
        LayerSpec::Tanh,
        LayerSpec::Reshape { rows, cols },
    ]);
    for &f in CNN_FILTERS.iter().rev() {
        layers.extend([LayerSpec::Upsample1D { factor: 2 }, conv(f), LayerSpec::Tanh]);
    }
    layers.push(conv(channels));
    Model::new((timesteps, channels), layers, seed)
}

/// Architecture and hyperparameters of one autoencoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: ArchitectureId,
    /// Window length per channel.
    pub timesteps: usize,
    pub channels: usize,
    /// Characteristic width (DNN and LSTM).
    pub n: usize,
    pub cnn_bottleneck: usize,
}

impl ModelSpec {
    pub fn new(arch: ArchitectureId, channels: usize) -> Self {
        Self {
            arch,
            timesteps: WINDOW_SIZE,
            channels,
            n: match arch {
                ArchitectureId::Lstm => DEFAULT_LSTM_N,
                _ => DEFAULT_DNN_N,
            },
            cnn_bottleneck: DEFAULT_CNN_BOTTLENECK,
        }
    }

    /// Stacked input length of the DNN.
    pub fn x(&self) -> usize {
        self.timesteps * self.channels
    }

    pub fn build(&self, seed: u64) -> Result<Model> {
        match self.arch {
            ArchitectureId::Dnn => build_dnn(self.x(), self.n, seed),
            ArchitectureId::Lstm => build_lstm(self.n, self.timesteps, self.channels, seed),
            ArchitectureId::Cnn => {
                build_cnn(self.timesteps, self.channels, self.cnn_bottleneck, seed)
            }
        }
    }
}

/// A model plus the mapping between windows and its input layout: the DNN
/// sees channels stacked into one row, the LSTM and CNN see `time ×
/// channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub spec: ModelSpec,
    pub model: Model,
}

impl Autoencoder {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        let model = spec.build(seed)?;
        Ok(Self { spec, model })
    }

    pub fn from_model(spec: ModelSpec, model: Model) -> Result<Self> {
        let expected = spec.build(0)?;
        if expected.layer_specs() != model.layer_specs()
            || expected.input_shape() != model.input_shape()
        {
            return Err(Error::shape(format!(
                "model layers do not match the {} recipe",
                spec.arch
            )));
        }
        Ok(Self { spec, model })
    }

    pub fn to_input(&self, w: &Window) -> Result<Tensor> {
        let (channels, len) = w.values.shape();
        if channels != self.spec.channels || len != self.spec.timesteps {
            return Err(Error::shape(format!(
                "window is {channels}x{len}, {} expects {}x{}",
                self.spec.arch, self.spec.channels, self.spec.timesteps
            )));
        }
        Ok(match self.spec.arch {
            ArchitectureId::Dnn => w.to_flat(),
            _ => w.to_sequence(),
        })
    }

    fn output_window(&self, like: &Window, out: Tensor) -> Result<Window> {
        let values = match self.spec.arch {
            ArchitectureId::Dnn => out.reshaped(self.spec.channels, self.spec.timesteps)?,
            _ => out.transpose(),
        };
        Ok(Window {
            sample_id: like.sample_id,
            window_index: like.window_index,
            values,
        })
    }

    /// Window-shaped reconstruction.
    pub fn reconstruct(&self, w: &Window) -> Result<Window> {
        let out = self.model.predict(&self.to_input(w)?)?;
        self.output_window(w, out)
    }

    pub fn window_error(&self, w: &Window) -> Result<f64> {
        let rec = self.reconstruct(w)?;
        crate::detect::window_error(&w.values, &rec.values)
    }

    pub fn train(&mut self, batch: &WindowBatch, cfg: &TrainConfig) -> Result<TrainReport> {
        let inputs = batch
            .windows
            .iter()
            .map(|w| self.to_input(w))
            .collect::<Result<Vec<_>>>()?;
        nn::train(&mut self.model, &inputs, cfg)
    }
}
