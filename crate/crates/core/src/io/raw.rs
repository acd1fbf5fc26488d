//! Raw little-endian payloads described by a small TOML sidecar:
//!
//! ```toml
//! element_type = 4      # type code, see ElementType
//! rank = 2
//! dims = [160, 160]
//! byte_order = "little"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndarray::{ElementType, NDArray, Storage, MAX_RANK};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSidecar {
    pub element_type: u64,
    pub rank: usize,
    pub dims: Vec<usize>,
    pub byte_order: String,
}

impl RawSidecar {
    pub fn describe(array: &NDArray) -> Self {
        RawSidecar {
            element_type: u64::from(array.element_type().code()),
            rank: array.rank(),
            dims: array.dims().to_vec(),
            byte_order: "little".into(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let sidecar: RawSidecar = toml::from_str(text).map_err(|e| Error::MalformedSidecar(e.message().to_string()))?;
        sidecar.validate()?;
        Ok(sidecar)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::MalformedSidecar(m));
        if ElementType::from_code(self.element_type).is_none() {
            return bad(format!("unknown element type code {}", self.element_type));
        }
        if self.rank == 0 || self.rank > MAX_RANK {
            return bad(format!("rank {} outside 1..={MAX_RANK}", self.rank));
        }
        if self.dims.len() != self.rank {
            return bad(format!("rank {} but {} dims", self.rank, self.dims.len()));
        }
        if self.dims.contains(&0) {
            return bad("zero-length dimension".into());
        }
        if self.byte_order != "little" {
            return bad(format!("byte order `{}` (only `little` is supported)", self.byte_order));
        }
        Ok(())
    }

    pub fn element_type(&self) -> ElementType {
        ElementType::from_code(self.element_type).expect("validated")
    }

    /// Exact payload length in bytes.
    pub fn byte_len(&self) -> Result<u64> {
        self.dims
            .iter()
            .try_fold(self.element_type().size_bytes() as u64, |acc, &d| acc.checked_mul(d as u64))
            .ok_or_else(|| Error::MalformedSidecar("payload size overflows".into()))
    }
}

pub fn read_raw(path: impl AsRef<Path>, sidecar_path: impl AsRef<Path>) -> Result<NDArray> {
    let sidecar = RawSidecar::parse(&std::fs::read_to_string(sidecar_path)?)?;
    decode_raw(&sidecar, &std::fs::read(path)?)
}

pub fn decode_raw(sidecar: &RawSidecar, payload: &[u8]) -> Result<NDArray> {
    sidecar.validate()?;
    let expected = sidecar.byte_len()?;
    if payload.len() as u64 != expected {
        return Err(Error::SizeMismatch { expected, found: payload.len() as u64 });
    }
    let storage = Storage::from_le_bytes(sidecar.element_type(), payload)?;
    NDArray::new(sidecar.dims.clone(), storage)
}

pub fn write_raw(path: impl AsRef<Path>, sidecar_path: impl AsRef<Path>, array: &NDArray) -> Result<()> {
    let sidecar = toml::to_string(&RawSidecar::describe(array)).map_err(|e| Error::MalformedSidecar(e.to_string()))?;
    std::fs::write(path, array.as_bytes())?;
    std::fs::write(sidecar_path, sidecar)?;
    Ok(())
}
