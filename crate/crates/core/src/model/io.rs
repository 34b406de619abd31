//! Model file: `{"version":1,"factors":[...],"seed":int,"params":{...}}`.
//! Parameters are keyed `ae<i>.<net>.<slot>`; matrices are nested row-major
//! arrays, vectors flat arrays. Floats are written in shortest round-trip
//! form so save → load reproduces every bit.

use std::path::Path;

use serde_json::{Map, Value};

use super::{DisentangleModel, ModelDims};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SlotKind};
use crate::synthgen::FactorSpec;

pub const MODEL_VERSION: u64 = 1;

fn invalid(reason: impl Into<String>) -> Error {
    Error::Invalid {
        what: "model file",
        reason: reason.into(),
    }
}

impl DisentangleModel {
    pub fn to_json(&self) -> Value {
        let mut params = Map::new();
        for store in self.stores() {
            for (idx, slot) in store.slots().iter().enumerate() {
                let v = match slot.kind {
                    SlotKind::Vector => Value::from(slot.value.as_slice().to_vec()),
                    SlotKind::Matrix => Value::from(slot.value.to_rows()),
                };
                params.insert(store.qualified(idx), v);
            }
        }
        let mut root = Map::new();
        root.insert("version".into(), MODEL_VERSION.into());
        root.insert("factors".into(), serde_json::to_value(&self.factors).expect("plain data"));
        root.insert("seed".into(), self.seed.into());
        root.insert("params".into(), Value::Object(params));
        Value::Object(root)
    }

    pub fn to_json_string(&self) -> String {
        self.to_json().to_string()
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| invalid("root is not an object"))?;
        let version = obj
            .get("version")
            .and_then(Value::as_u64)
            .ok_or_else(|| invalid("missing version"))?;
        if version != MODEL_VERSION {
            return Err(Error::Version {
                what: "model",
                found: version,
                expected: MODEL_VERSION,
            });
        }
        if let Some(k) = obj.keys().find(|k| !matches!(k.as_str(), "version" | "factors" | "seed" | "params")) {
            return Err(invalid(format!("unknown key {k}")));
        }
        let factors: Vec<FactorSpec> =
            serde_json::from_value(obj.get("factors").cloned().ok_or_else(|| invalid("missing factors"))?)?;
        let seed = obj.get("seed").and_then(Value::as_u64).ok_or_else(|| invalid("missing seed"))?;
        let params = obj
            .get("params")
            .and_then(Value::as_object)
            .ok_or_else(|| invalid("missing params"))?;

        let shape_of = |key: &str| -> Result<(usize, usize)> {
            let rows = params
                .get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| invalid(format!("missing {key}")))?;
            let cols = rows.first().and_then(Value::as_array).map_or(0, Vec::len);
            Ok((rows.len(), cols))
        };
        let (ae_hidden, _) = shape_of("ae0.enc.W1")?;
        let (latent, _) = shape_of("ae0.enc.W2")?;
        let (pred_hidden, _) = shape_of("ae0.pred1.W1")?;
        let dims = ModelDims {
            latent,
            ae_hidden,
            pred_hidden,
        };

        let mut model = DisentangleModel::init(&factors, dims, seed)?;
        let mut seen = 0;
        for store in model.stores_mut() {
            for idx in 0..store.slots().len() {
                let key = store.qualified(idx);
                let raw = params.get(&key).ok_or_else(|| invalid(format!("missing {key}")))?;
                let (rows, cols) = store.value(idx).shape();
                let value = match store.slot(idx).kind {
                    SlotKind::Vector => {
                        let v: Vec<f64> = serde_json::from_value(raw.clone())?;
                        Matrix::from_vec(1, v.len(), v)?
                    }
                    SlotKind::Matrix => {
                        let r: Vec<Vec<f64>> = serde_json::from_value(raw.clone())?;
                        Matrix::from_rows(&r)?
                    }
                };
                if value.shape() != (rows, cols) {
                    return Err(Error::dim(key, format!("{rows}x{cols}"), format!("{:?}", value.shape())));
                }
                store.set_value(idx, value)?;
                seen += 1;
            }
        }
        if seen != params.len() {
            return Err(invalid(format!("{} unexpected parameter keys", params.len() - seen)));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let v: Value = serde_json::from_str(&text)?;
        Self::from_json(&v)
    }
}
