//! Versioned JSON container for model parameters.
//!
//! ```text
//! {
//!   "magic": "INTENT-MODEL",
//!   "version": 1,
//!   "kind": "mlp",
//!   "meta": { ... free-form, model specific ... },
//!   "tensors": [ { "name": "dense0.weight", "shape": [64, 24], "data": [...] }, ... ]
//! }
//! ```
//!
//! `data` is row-major. Floats are written in shortest round-trip form, so a
//! save/load cycle reproduces every parameter bit for bit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Matrix, NumError, Result};

pub const CONTAINER_MAGIC: &str = "INTENT-MODEL";
pub const CONTAINER_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelContainer {
    pub magic: String,
    pub version: u32,
    pub kind: String,
    pub meta: BTreeMap<String, serde_json::Value>,
    pub tensors: Vec<TensorRecord>,
}

impl ModelContainer {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            magic: CONTAINER_MAGIC.to_string(),
            version: CONTAINER_VERSION,
            kind: kind.into(),
            meta: BTreeMap::new(),
            tensors: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Serialize) -> Self {
        let value = serde_json::to_value(value).expect("meta values are plain data");
        self.meta.insert(key.to_string(), value);
        self
    }

    pub fn push_vector(&mut self, name: impl Into<String>, data: &[f64]) {
        self.tensors.push(TensorRecord {
            name: name.into(),
            shape: vec![data.len()],
            data: data.to_vec(),
        });
    }

    pub fn push_matrix(&mut self, name: impl Into<String>, m: &Matrix) {
        self.tensors.push(TensorRecord {
            name: name.into(),
            shape: vec![m.rows(), m.cols()],
            data: m.as_slice().to_vec(),
        });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("container is plain data")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ModelContainer =
            serde_json::from_str(text).map_err(|e| NumError::BadContainer(e.to_string()))?;
        if c.magic != CONTAINER_MAGIC {
            return Err(NumError::BadContainer(format!("bad magic {:?}", c.magic)));
        }
        if c.version != CONTAINER_VERSION {
            return Err(NumError::BadContainer(format!(
                "unsupported version {}",
                c.version
            )));
        }
        for t in &c.tensors {
            if t.shape.iter().product::<usize>() != t.data.len() {
                return Err(NumError::BadContainer(format!(
                    "tensor {} has shape {:?} but {} values",
                    t.name,
                    t.shape,
                    t.data.len()
                )));
            }
        }
        Ok(c)
    }

    pub fn meta<T: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<T> {
        let v = self
            .meta
            .get(key)
            .ok_or_else(|| NumError::BadContainer(format!("missing meta field {key}")))?;
        serde_json::from_value(v.clone()).map_err(|e| NumError::BadContainer(format!("{key}: {e}")))
    }

    fn tensor(&self, name: &str) -> Result<&TensorRecord> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| NumError::BadContainer(format!("missing tensor {name}")))
    }

    pub fn vector(&self, name: &str) -> Result<Vec<f64>> {
        let t = self.tensor(name)?;
        if t.shape.len() != 1 {
            return Err(NumError::BadContainer(format!("{name} is not a vector")));
        }
        Ok(t.data.clone())
    }

    pub fn matrix(&self, name: &str) -> Result<Matrix> {
        let t = self.tensor(name)?;
        if t.shape.len() != 2 {
            return Err(NumError::BadContainer(format!("{name} is not a matrix")));
        }
        Matrix::from_vec(t.shape[0], t.shape[1], t.data.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let m = Matrix::from_rows(&[[0.1, 1.0 / 3.0], [-2e-300, 7.25]]).unwrap();
        let mut c = ModelContainer::new("test").with_meta("hidden", 50usize);
        c.push_matrix("w", &m);
        c.push_vector("b", &[std::f64::consts::PI]);
        let back = ModelContainer::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.matrix("w").unwrap(), m);
        assert_eq!(back.meta::<usize>("hidden").unwrap(), 50);
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let mut c = ModelContainer::new("x");
        c.magic = "NOPE".into();
        assert!(ModelContainer::from_json(&c.to_json()).is_err());
    }

    #[test]
    fn inconsistent_shape_is_rejected() {
        let mut c = ModelContainer::new("x");
        c.tensors.push(TensorRecord {
            name: "w".into(),
            shape: vec![2, 2],
            data: vec![1.0],
        });
        assert!(ModelContainer::from_json(&c.to_json()).is_err());
    }
}
