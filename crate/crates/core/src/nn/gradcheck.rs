//! Central finite-difference verification of [`Model::backward`].

use super::loss::mse_grad;
use super::model::{Model, Parameters};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

/// Denominator floor in the relative error.
const REL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Name and in-tensor index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, 1e-12)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Loss used for checking: reconstruction MSE when the model maps a shape
/// onto itself, MSE against zeros otherwise.
fn check_target(model: &Model, input: &Tensor) -> Tensor {
    if model.output_shape() == input.shape() {
        input.clone()
    } else {
        let (r, c) = model.output_shape();
        Tensor::zeros(r, c)
    }
}

pub fn analytic_gradient(model: &Model, input: &Tensor, target: &Tensor) -> Result<Parameters> {
    let (y, cache) = model.forward(input)?;
    model.backward(&cache, &mse_grad(&y, target))
}

/// Central differences `(L(p + eps) - L(p - eps)) / 2eps` at the given flat
/// parameter indices.
pub fn numeric_gradient(
    model: &Model,
    input: &Tensor,
    target: &Tensor,
    epsilon: f64,
    indices: &[usize],
) -> Result<Vec<f64>> {
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(indices.len());
    for &i in indices {
        let original = probe.parameters().values()[i];
        probe.parameters_mut().values_mut()[i] = original + epsilon;
        let plus = probe.predict(input)?;
        probe.parameters_mut().values_mut()[i] = original - epsilon;
        let minus = probe.predict(input)?;
        probe.parameters_mut().values_mut()[i] = original;
        out.push(loss_difference(&plus, &minus, target) / (2.0 * epsilon));
    }
    Ok(out)
}

/// `mse(plus, t) - mse(minus, t)` as `mean((plus - minus)(plus + minus - 2t))`,
/// which keeps the digits that subtracting two rounded losses would cancel.
fn loss_difference(plus: &Tensor, minus: &Tensor, target: &Tensor) -> f64 {
    let sum: f64 = plus
        .as_slice()
        .iter()
        .zip(minus.as_slice())
        .zip(target.as_slice())
        .map(|((p, m), t)| (p - m) * (p + m - 2.0 * t))
        .sum();
    sum / plus.len() as f64
}

/// Compares gradients at `indices` and reports the worst relative error.
pub fn compare(
    params: &Parameters,
    analytic: &[f64],
    numeric: &[f64],
    indices: &[usize],
) -> GradCheckReport {
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: indices.len(),
    };
    for (k, &i) in indices.iter().enumerate() {
        let err = relative_error(analytic[i], numeric[k]);
        if err > report.max_relative_error || report.worst.is_none() {
            report.max_relative_error = report.max_relative_error.max(err);
            let slot = params.slot_of(i).expect("index in range");
            report.worst = Some((slot.name.clone(), i - slot.offset));
        }
    }
    report
}

/// Max relative error over every parameter of `model`.
pub fn grad_check(model: &Model, input: &Tensor, epsilon: f64) -> Result<f64> {
    let indices: Vec<usize> = (0..model.param_count()).collect();
    Ok(grad_check_indices(model, input, epsilon, &indices)?.max_relative_error)
}

/// Checks up to `per_tensor` entries of every named tensor: the first, the
/// last, and seeded uniform picks in between.
pub fn grad_check_sampled(
    model: &Model,
    input: &Tensor,
    epsilon: f64,
    per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let indices = sample_indices(model.parameters(), per_tensor, seed);
    grad_check_indices(model, input, epsilon, &indices)
}

pub fn sample_indices(params: &Parameters, per_tensor: usize, seed: u64) -> Vec<usize> {
    let mut rng = SplitMix64::new(seed);
    let mut indices = Vec::new();
    for slot in params.slots() {
        if slot.len <= per_tensor {
            indices.extend(slot.offset..slot.offset + slot.len);
            continue;
        }
        let mut picked = vec![slot.offset, slot.offset + slot.len - 1];
        while picked.len() < per_tensor {
            let i = slot.offset + rng.below(slot.len);
            if !picked.contains(&i) {
                picked.push(i);
            }
        }
        picked.sort_unstable();
        indices.extend(picked);
    }
    indices
}

fn grad_check_indices(
    model: &Model,
    input: &Tensor,
    epsilon: f64,
    indices: &[usize],
) -> Result<GradCheckReport> {
    if model.param_count() == 0 {
        return Err(Error::Usage("grad_check needs at least one parameter".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Usage("grad_check epsilon must be positive".into()));
    }
    let target = check_target(model, input);
    let analytic = analytic_gradient(model, input, &target)?;
    let numeric = numeric_gradient(model, input, &target, epsilon, indices)?;
    Ok(compare(model.parameters(), analytic.values(), &numeric, indices))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerSpec;

    fn random_input(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut rng = SplitMix64::new(seed);
        Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .unwrap()
    }

    /// Every layer kind, each surrounded by something with parameters.
    #[test]
    fn every_layer_kind_matches_finite_differences() {
        let cases: Vec<((usize, usize), Vec<LayerSpec>)> = vec![
            ((1, 5), vec![LayerSpec::Dense { units: 4 }]),
            ((1, 5), vec![LayerSpec::Dense { units: 4 }, LayerSpec::Tanh]),
            ((7, 3), vec![LayerSpec::Conv1D { filters: 4, kernel_size: 2 }]),
            ((7, 3), vec![LayerSpec::Conv1D { filters: 2, kernel_size: 3 }]),
            (
                (8, 2),
                vec![
                    LayerSpec::Conv1D { filters: 3, kernel_size: 2 },
                    LayerSpec::MaxPool1D { pool_size: 2 },
                    LayerSpec::Upsample1D { factor: 2 },
                    LayerSpec::Dense { units: 2 },
                ],
            ),
            ((6, 3), vec![LayerSpec::Lstm { units: 4, return_sequences: true }]),
            (
                (6, 3),
                vec![
                    LayerSpec::Lstm { units: 4, return_sequences: false },
                    LayerSpec::RepeatLast { repeat_count: 6 },
                    LayerSpec::Lstm { units: 3, return_sequences: true },
                    LayerSpec::Dense { units: 3 },
                ],
            ),
            (
                (4, 2),
                vec![
                    LayerSpec::Flatten,
                    LayerSpec::Dense { units: 8 },
                    LayerSpec::Reshape { rows: 4, cols: 2 },
                ],
            ),
        ];
        for (i, (shape, specs)) in cases.into_iter().enumerate() {
            let model = Model::new(shape, specs, 10 + i as u64).unwrap();
            let input = random_input(shape.0, shape.1, 100 + i as u64);
            let err = grad_check(&model, &input, 1e-5).unwrap();
            assert!(err < 1e-4, "case {i}: {err}");
        }
    }

    #[test]
    fn injected_fault_is_detected() {
        let model = Model::new(
            (1, 6),
            vec![LayerSpec::Dense { units: 4 }, LayerSpec::Tanh, LayerSpec::Dense { units: 6 }],
            3,
        )
        .unwrap();
        let input = random_input(1, 6, 4);
        let mut analytic = analytic_gradient(&model, &input, &input).unwrap();
        let slot = analytic.slots().iter().position(|s| s.name == "layer2.dense.kernel").unwrap();
        for g in analytic.tensor_mut(slot) {
            *g *= 1.01;
        }
        let all: Vec<usize> = (0..model.param_count()).collect();
        let numeric = numeric_gradient(&model, &input, &input, 1e-5, &all).unwrap();
        let report = compare(model.parameters(), analytic.values(), &numeric, &all);
        // A 1% scale gives |1.01g - g| / |1.01g| = 0.01 / 1.01.
        assert!((report.max_relative_error - 0.01 / 1.01).abs() < 1e-5, "{report:?}");
        assert!(report.max_relative_error > 1e-4 * 50.0);
        assert!(report.worst.unwrap().0.starts_with("layer2"));
    }

    #[test]
    fn all_zero_model_is_well_defined() {
        let model = Model::uninitialized(
            (1, 4),
            vec![LayerSpec::Dense { units: 3 }, LayerSpec::Tanh, LayerSpec::Dense { units: 4 }],
        )
        .unwrap();
        let err = grad_check(&model, &Tensor::zeros(1, 4), 1e-5).unwrap();
        assert!(err.is_finite());
        assert!(err < 1e-4);
    }

    #[test]
    fn sampled_indices_cover_every_tensor() {
        let model = Model::new(
            (5, 2),
            vec![LayerSpec::Lstm { units: 8, return_sequences: true }, LayerSpec::Dense { units: 2 }],
            0,
        )
        .unwrap();
        let idx = sample_indices(model.parameters(), 6, 1);
        for slot in model.parameters().slots() {
            let n = idx.iter().filter(|&&i| i >= slot.offset && i < slot.offset + slot.len).count();
            assert_eq!(n, slot.len.min(6), "{}", slot.name);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let model = Model::new((1, 2), vec![LayerSpec::Tanh], 0).unwrap();
        assert!(grad_check(&model, &Tensor::zeros(1, 2), 1e-5).is_err());
        let model = Model::new((1, 2), vec![LayerSpec::Dense { units: 2 }], 0).unwrap();
        assert!(grad_check(&model, &Tensor::zeros(1, 2), 0.0).is_err());
    }
}
