use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{mse, mse_grad};
use super::model::Model;
use super::optim::Adam;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

/// Windows per gradient work unit. Fixed so the summation order (and thus
/// every bit of the result) does not depend on the thread count.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 100,
            early_stop_patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config("learning_rate must be finite and non-negative"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss per epoch, measured before each window's update.
    pub loss_history: Vec<f64>,
    /// Loss on the held-out tail after each epoch (training loss when the
    /// set is too small to hold anything out).
    pub validation_history: Vec<f64>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.loss_history.len()
    }
}

/// Trains `model` as an autoencoder (target = input) with Adam over
/// seed-shuffled mini-batches.
///
/// The last 10% of `windows` is held out for early stopping; training ends
/// after `max_epochs` or once the held-out loss has not improved for
/// `early_stop_patience` epochs, and the parameters of the best held-out
/// epoch are restored.
pub fn train(model: &mut Model, windows: &[Tensor], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if windows.is_empty() {
        return Err(Error::shape("cannot train on an empty window set"));
    }
    if let Some(bad) = windows.iter().find(|w| w.shape() != model.input_shape()) {
        return Err(Error::shape(format!(
            "training window is {}x{}, model expects {}x{}",
            bad.rows(),
            bad.cols(),
            model.input_shape().0,
            model.input_shape().1
        )));
    }
    let n_val = windows.len() / 10;
    let (fit_set, val_set) = windows.split_at(windows.len() - n_val);

    let mut rng = SplitMix64::new(cfg.seed);
    let mut opt = Adam::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..fit_set.len()).collect();
    let mut losses = vec![0.0; fit_set.len()];

    let mut report = TrainReport {
        loss_history: Vec::new(),
        validation_history: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut since_best = 0;

    for epoch in 0..cfg.max_epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let grads = batch_gradient(model, fit_set, batch, &mut losses)?;
            let scale = 1.0 / batch.len() as f64;
            let grads: Vec<f64> = grads.into_iter().map(|g| g * scale).collect();
            opt.step(model.parameters_mut().values_mut(), &grads);
        }
        let train_loss = losses.iter().sum::<f64>() / losses.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: train_loss,
            });
        }
        let val_loss = if val_set.is_empty() {
            train_loss
        } else {
            mean_loss(model, val_set)?
        };
        report.loss_history.push(train_loss);
        report.validation_history.push(val_loss);
        if !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: val_loss,
            });
        }

        if best.as_ref().map_or(true, |(b, _)| val_loss < *b) {
            best = Some((val_loss, model.parameters().values().to_vec()));
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.early_stop_patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    if let Some((_, values)) = best {
        model.set_parameter_values(&values)?;
    }
    Ok(report)
}

/// Summed gradient over `batch`; per-window losses land in `losses`.
fn batch_gradient(
    model: &Model,
    windows: &[Tensor],
    batch: &[usize],
    losses: &mut [f64],
) -> Result<Vec<f64>> {
    let partials: Vec<(Vec<f64>, Vec<(usize, f64)>)> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grads = vec![0.0; model.param_count()];
            let mut chunk_losses = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let x = &windows[i];
                let (y, cache) = model.forward(x)?;
                chunk_losses.push((i, mse(&y, x)));
                model.backward_into(&cache, &mse_grad(&y, x), &mut grads)?;
            }
            Ok((grads, chunk_losses))
        })
        .collect::<Result<_>>()?;
    let mut iter = partials.into_iter();
    let (mut total, first_losses) = iter.next().expect("non-empty batch");
    for (i, l) in first_losses {
        losses[i] = l;
    }
    for (grads, chunk_losses) in iter {
        for (t, g) in total.iter_mut().zip(&grads) {
            *t += g;
        }
        for (i, l) in chunk_losses {
            losses[i] = l;
        }
    }
    Ok(total)
}

/// Mean reconstruction loss over `windows`, summed in index order.
pub fn mean_loss(model: &Model, windows: &[Tensor]) -> Result<f64> {
    let per: Vec<f64> = windows
        .par_iter()
        .map(|w| model.predict(w).map(|y| mse(&y, w)))
        .collect::<Result<_>>()?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}
