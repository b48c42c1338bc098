use crate::tensor::Tensor;

/// Mean over all elements of the squared difference.
pub fn mse(output: &Tensor, target: &Tensor) -> f64 {
    debug_assert_eq!(output.shape(), target.shape());
    let sum: f64 = output
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(y, t)| (y - t) * (y - t))
        .sum();
    sum / output.len() as f64
}

/// `d mse / d output = 2 (output - target) / len`.
pub fn mse_grad(output: &Tensor, target: &Tensor) -> Tensor {
    let scale = 2.0 / output.len() as f64;
    let data = output
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(y, t)| scale * (y - t))
        .collect();
    Tensor::from_vec(output.rows(), output.cols(), data).expect("same shape")
}
