//! JSON container for tensor trains.
//!
//! ```json
//! { "format": "rals-tt", "version": 1, "dims": [n_1, ...], "ranks": [1, r_1, ..., 1],
//!   "components": [[...], ...] }
//! ```
//!
//! Component `k` is a flat array of `r_{k-1} * n_k * r_k` numbers in row-major
//! `(left, mode, right)` order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::{Component, TensorTrain};
use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "rals-tt";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtFile {
    pub format: String,
    pub version: u32,
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub components: Vec<Vec<f64>>,
}

impl From<&TensorTrain> for TtFile {
    fn from(tt: &TensorTrain) -> Self {
        Self {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            dims: tt.dims(),
            ranks: tt.ranks(),
            components: tt.components().iter().map(|c| c.data().to_vec()).collect(),
        }
    }
}

impl TryFrom<TtFile> for TensorTrain {
    type Error = Error;

    fn try_from(f: TtFile) -> Result<Self> {
        if f.format != FORMAT_TAG || f.version != FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported container {} v{}", f.format, f.version)));
        }
        if f.ranks.len() != f.dims.len() + 1 || f.components.len() != f.dims.len() {
            return Err(Error::DimensionMismatch("dims, ranks and components disagree".into()));
        }
        let comps = f
            .components
            .into_iter()
            .enumerate()
            .map(|(k, data)| Component::new(f.ranks[k], f.dims[k], f.ranks[k + 1], data))
            .collect::<Result<Vec<_>>>()?;
        TensorTrain::new(comps)
    }
}

impl TensorTrain {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&TtFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: TtFile = serde_json::from_str(s)?;
        f.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
