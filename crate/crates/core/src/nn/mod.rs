//! A small differentiable-layer engine in `f64`: sequential models built
//! from dense, tanh, 1-D convolution, pooling, upsampling and LSTM layers,
//! trained with Adam on mean-squared reconstruction error.

pub mod checkpoint;
pub mod gradcheck;
mod layer;
pub mod loss;
mod model;
pub mod optim;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, NamedTensor};
pub use gradcheck::{grad_check, grad_check_sampled, GradCheckReport};
pub use layer::{LayerSpec, Shape};
pub use model::{Cache, Model, ParamSlot, Parameters};
pub use optim::Adam;
pub use train::{train, TrainConfig, TrainReport};
