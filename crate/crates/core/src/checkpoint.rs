//! JSON checkpoint format shared by every network in the crate:
//!
//! ```json
//! {"version": "1",
//!  "arrays": {"<name>": {"shape": [..], "data": [..]}},
//!  "meta": {..}}
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::nn::{Parameters, Tensor};
use crate::{Error, Result};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub arrays: BTreeMap<String, ArrayEntry>,
    #[serde(default)]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

impl Default for Checkpoint {
    fn default() -> Self {
        Self {
            version: FORMAT_VERSION.to_string(),
            arrays: BTreeMap::new(),
            meta: serde_json::Map::new(),
        }
    }
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_tensor(&mut self, name: impl Into<String>, t: &Tensor) {
        self.arrays.insert(
            name.into(),
            ArrayEntry {
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            },
        );
    }

    /// Stores every tensor of `params` as `<prefix>.<local name>`.
    pub fn insert_params<P: Parameters>(&mut self, prefix: &str, params: &P) {
        for (name, t) in params.names().into_iter().zip(params.tensors()) {
            self.insert_tensor(join(prefix, &name), t);
        }
    }

    pub fn tensor(&self, name: &str) -> Result<Tensor> {
        let entry = self
            .arrays
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing array `{name}`")))?;
        Tensor::new(entry.shape.clone(), entry.data.clone())
            .map_err(|e| Error::Checkpoint(format!("array `{name}`: {e}")))
    }

    /// Overwrites `params` in place, requiring every stored shape to match
    /// the architecture already present in `params`.
    pub fn load_params<P: Parameters>(&self, prefix: &str, params: &mut P) -> Result<()> {
        let names = params.names();
        for (name, t) in names.into_iter().zip(params.tensors_mut()) {
            let full = join(prefix, &name);
            let stored = self.tensor(&full)?;
            if stored.shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "array `{full}` has shape {:?}, architecture expects {:?}",
                    stored.shape(),
                    t.shape()
                )));
            }
            if !stored.is_finite() {
                return Err(Error::Checkpoint(format!("array `{full}` contains non-finite values")));
            }
            *t = stored;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version `{}`", ckpt.version)));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_json(&text)
    }
}

fn join(prefix: &str, name: &str) -> String {
    match (prefix.is_empty(), name.is_empty()) {
        (true, _) => name.to_string(),
        (false, true) => prefix.to_string(),
        (false, false) => format!("{prefix}.{name}"),
    }
}
