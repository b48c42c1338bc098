use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::layer::{self, Init, LayerCache, LayerSpec, Shape};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

/// Location of one named tensor inside a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSlot {
    pub name: String,
    pub shape: Vec<usize>,
    pub layer: usize,
    pub offset: usize,
    pub len: usize,
}

/// Named tensors stored back to back in one flat vector. Gradients use
/// the same type and layout as the parameters they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    slots: Vec<ParamSlot>,
    values: Vec<f64>,
}

impl Parameters {
    pub fn zeros_like(other: &Parameters) -> Self {
        Self {
            slots: other.slots.clone(),
            values: vec![0.0; other.values.len()],
        }
    }

    pub fn slots(&self) -> &[ParamSlot] {
        &self.slots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.slots
            .iter()
            .find(|s| s.name == name)
            .map(|s| &self.values[s.offset..s.offset + s.len])
    }

    pub fn tensor(&self, slot: &ParamSlot) -> &[f64] {
        &self.values[slot.offset..slot.offset + slot.len]
    }

    pub fn tensor_mut(&mut self, slot_index: usize) -> &mut [f64] {
        let s = &self.slots[slot_index];
        &mut self.values[s.offset..s.offset + s.len]
    }

    /// Slot owning flat index `i`.
    pub fn slot_of(&self, i: usize) -> Option<&ParamSlot> {
        self.slots.iter().find(|s| i >= s.offset && i < s.offset + s.len)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ResolvedLayer {
    pub spec: LayerSpec,
    pub in_shape: Shape,
    pub out_shape: Shape,
    pub params: std::ops::Range<usize>,
}

static NEXT_MODEL_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_MODEL_ID.fetch_add(1, Ordering::Relaxed)
}

/// Sequential stack of layers with its parameters.
#[derive(Debug)]
pub struct Model {
    input_shape: Shape,
    layers: Vec<ResolvedLayer>,
    params: Parameters,
    // Changes whenever parameters may have changed; caches remember it.
    revision: u64,
}

impl Clone for Model {
    fn clone(&self) -> Self {
        Self {
            input_shape: self.input_shape,
            layers: self.layers.clone(),
            params: self.params.clone(),
            revision: fresh_id(),
        }
    }
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.input_shape == other.input_shape
            && self.layers == other.layers
            && self.params == other.params
    }
}

/// Activations saved by [`Model::forward`] for one input.
#[derive(Debug, Clone)]
pub struct Cache {
    revision: u64,
    input_shape: Shape,
    layers: Vec<LayerCache>,
}

impl Model {
    /// Builds the stack and initializes weights uniformly in
    /// `±sqrt(6 / (fan_in + fan_out))` from `seed`; biases start at zero
    /// (LSTM forget gates at one).
    pub fn new(input_shape: Shape, specs: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let mut model = Self::uninitialized(input_shape, specs)?;
        let mut rng = SplitMix64::new(seed);
        let shapes: Vec<_> = model
            .layers
            .iter()
            .flat_map(|l| l.spec.param_shapes(l.in_shape))
            .collect();
        for (i, ps) in shapes.iter().enumerate() {
            let values = model.params.tensor_mut(i);
            match ps.kind {
                Init::Glorot => {
                    let limit = (6.0 / (ps.fan_in + ps.fan_out) as f64).sqrt();
                    for v in values.iter_mut() {
                        *v = rng.uniform(-limit, limit);
                    }
                }
                Init::Zero => values.fill(0.0),
                Init::LstmBias => {
                    let h = values.len() / 4;
                    values.fill(0.0);
                    values[h..2 * h].fill(1.0);
                }
            }
        }
        Ok(model)
    }

    /// Resolves shapes and allocates zeroed parameters.
    pub fn uninitialized(input_shape: Shape, specs: Vec<LayerSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::config("a model needs at least one layer"));
        }
        let mut shape = input_shape;
        let mut layers = Vec::with_capacity(specs.len());
        let mut slots = Vec::new();
        let mut offset = 0;
        for (i, spec) in specs.into_iter().enumerate() {
            let out = spec
                .output_shape(shape)
                .map_err(|e| Error::shape(format!("layer {i}: {e}")))?;
            let start = offset;
            for p in spec.param_shapes(shape) {
                let len: usize = p.shape.iter().product();
                slots.push(ParamSlot {
                    name: format!("layer{i}.{}.{}", spec.name(), p.name),
                    shape: p.shape,
                    layer: i,
                    offset,
                    len,
                });
                offset += len;
            }
            layers.push(ResolvedLayer {
                spec,
                in_shape: shape,
                out_shape: out,
                params: start..offset,
            });
            shape = out;
        }
        Ok(Self {
            input_shape,
            layers,
            params: Parameters {
                slots,
                values: vec![0.0; offset],
            },
            revision: fresh_id(),
        })
    }

    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    pub fn output_shape(&self) -> Shape {
        self.layers.last().expect("non-empty").out_shape
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    /// Output shape of every layer, in order.
    pub fn layer_output_shapes(&self) -> Vec<Shape> {
        self.layers.iter().map(|l| l.out_shape).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn parameters(&self) -> &Parameters {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut Parameters {
        self.revision = fresh_id();
        &mut self.params
    }

    pub fn set_parameter_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::shape(format!(
                "expected {} parameter values, got {}",
                self.params.len(),
                values.len()
            )));
        }
        self.parameters_mut().values.copy_from_slice(values);
        Ok(())
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape() != self.input_shape {
            let (r, c) = self.input_shape;
            return Err(Error::shape(format!(
                "layer 0 ({}): expected input {r}x{c}, got {}x{}",
                self.layers[0].spec.name(),
                input.rows(),
                input.cols()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, Cache)> {
        self.check_input(input)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let (y, cache) = layer::forward(
                &layer.spec,
                &self.params.values[layer.params.clone()],
                &x,
                layer.out_shape,
            );
            caches.push(cache);
            x = y;
        }
        Ok((
            x,
            Cache {
                revision: self.revision,
                input_shape: input.shape(),
                layers: caches,
            },
        ))
    }

    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        Ok(self.forward(input)?.0)
    }

    /// Output of every layer for one input (for inspection).
    pub fn activations(&self, input: &Tensor) -> Result<Vec<Tensor>> {
        self.check_input(input)?;
        let mut outs = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer::forward(
                &layer.spec,
                &self.params.values[layer.params.clone()],
                &x,
                layer.out_shape,
            )
            .0;
            outs.push(x.clone());
        }
        Ok(outs)
    }

    /// Gradients of the loss whose output-gradient is `loss_grad`.
    pub fn backward(&self, cache: &Cache, loss_grad: &Tensor) -> Result<Parameters> {
        let mut grads = Parameters::zeros_like(&self.params);
        self.backward_into(cache, loss_grad, &mut grads.values)?;
        Ok(grads)
    }

    /// Accumulates (adds) parameter gradients into `grads` and returns the
    /// gradient with respect to the model input.
    pub fn backward_into(
        &self,
        cache: &Cache,
        loss_grad: &Tensor,
        grads: &mut [f64],
    ) -> Result<Tensor> {
        if cache.revision != self.revision
            || cache.layers.len() != self.layers.len()
            || cache.input_shape != self.input_shape
        {
            return Err(Error::Usage(
                "cache does not come from a forward pass of this model's current parameters"
                    .into(),
            ));
        }
        if loss_grad.shape() != self.output_shape() {
            return Err(Error::shape(format!(
                "loss gradient is {}x{}, model output is {}x{}",
                loss_grad.rows(),
                loss_grad.cols(),
                self.output_shape().0,
                self.output_shape().1
            )));
        }
        if grads.len() != self.params.len() {
            return Err(Error::shape("gradient buffer length mismatch"));
        }
        let mut g = loss_grad.clone();
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            g = layer::backward(
                &layer.spec,
                &self.params.values[layer.params.clone()],
                lc,
                layer.in_shape,
                &g,
                &mut grads[layer.params.clone()],
            );
        }
        Ok(g)
    }
}
