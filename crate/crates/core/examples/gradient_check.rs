//! Finite-difference check of backpropagation for the three recipes.

use iiot_anomaly::models::{build_cnn, build_dnn, build_lstm};
use iiot_anomaly::nn::{grad_check, grad_check_sampled};
use iiot_anomaly::rng::SplitMix64;
use iiot_anomaly::tensor::Tensor;

fn input(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = SplitMix64::new(seed);
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.next_f64()).collect()).unwrap()
}

fn main() -> iiot_anomaly::Result<()> {
    let dnn = build_dnn(64, 64, 1)?;
    println!("DNN  {:>6} params, all checked: {:.2e}", dnn.param_count(), grad_check(&dnn, &input(1, 64, 1), 1e-5)?);

    let lstm = build_lstm(32, 64, 2, 2)?;
    let r = grad_check_sampled(&lstm, &input(64, 2, 2), 1e-5, 8, 0)?;
    println!("LSTM {:>6} params, {} checked: {:.2e} (worst {:?})", lstm.param_count(), r.checked, r.max_relative_error, r.worst);

    let cnn = build_cnn(64, 3, 32, 3)?;
    let r = grad_check_sampled(&cnn, &input(64, 3, 3), 1e-5, 8, 0)?;
    println!("CNN  {:>6} params, {} checked: {:.2e} (worst {:?})", cnn.param_count(), r.checked, r.max_relative_error, r.worst);
    Ok(())
}
