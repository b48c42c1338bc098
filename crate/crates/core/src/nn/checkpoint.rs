//! JSON checkpoint: layer specs, input shape and every named tensor.
//! Floats are written in shortest round-trip form, so save/load is exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layer::LayerSpec;
use super::model::Model;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "iiot-anomaly/checkpoint-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub input_shape: [usize; 2],
    pub layers: Vec<LayerSpec>,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_model(model: &Model) -> Self {
        let (r, c) = model.input_shape();
        let params = model.parameters();
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            input_shape: [r, c],
            layers: model.layer_specs(),
            tensors: params
                .slots()
                .iter()
                .map(|s| NamedTensor {
                    name: s.name.clone(),
                    shape: s.shape.clone(),
                    values: params.tensor(s).to_vec(),
                })
                .collect(),
        }
    }

    pub fn into_model(self) -> Result<Model> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::config(format!(
                "unsupported checkpoint format {:?}",
                self.format
            )));
        }
        let [r, c] = self.input_shape;
        let mut model = Model::uninitialized((r, c), self.layers)?;
        let slots = model.parameters().slots().to_vec();
        if slots.len() != self.tensors.len() {
            return Err(Error::shape(format!(
                "checkpoint holds {} tensors, the layer stack needs {}",
                self.tensors.len(),
                slots.len()
            )));
        }
        let mut values = Vec::with_capacity(model.param_count());
        for (slot, t) in slots.iter().zip(&self.tensors) {
            if slot.name != t.name || slot.shape != t.shape || t.values.len() != slot.len {
                return Err(Error::shape(format!(
                    "checkpoint tensor {} {:?} does not match expected {} {:?}",
                    t.name, t.shape, slot.name, slot.shape
                )));
            }
            values.extend_from_slice(&t.values);
        }
        model.set_parameter_values(&values)?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = Checkpoint::from_model(model).to_json()?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cp: Checkpoint = serde_json::from_str(&text)?;
    cp.into_model()
}
