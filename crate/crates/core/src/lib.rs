//! Unsupervised anomaly detection for multivariate industrial sensor
//! recordings: feature extraction, autoencoder and statistical detectors,
//! threshold calibration and evaluation.

pub mod baseline;
pub mod dataset;
pub mod detect;
pub mod error;
pub mod fft;
pub mod harness;
pub mod models;
pub mod nn;
pub mod rng;
pub mod signal;
pub mod tensor;

pub use error::{Error, Result};
