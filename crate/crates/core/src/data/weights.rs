use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::DataError;
use crate::nn::build_architecture;

pub const WEIGHT_MAGIC: &[u8; 8] = b"SPYKW001";
const VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

/// Named float32 tensors, kept in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightContainer {
    tensors: Vec<WeightTensor>,
}

impl WeightContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, dims: Vec<usize>, values: Vec<f32>) -> Result<(), DataError> {
        let name = name.into();
        let len = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| DataError::DimensionOverflow(format!("{name}: {dims:?}")))?;
        if len != values.len() {
            return Err(DataError::DimensionOverflow(format!(
                "{name}: dims {dims:?} need {len} values, got {}",
                values.len()
            )));
        }
        if dims.len() > u8::MAX as usize || dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(DataError::DimensionOverflow(format!("{name}: {dims:?}")));
        }
        if self.get(&name).is_some() {
            return Err(DataError::DuplicateTensor(name));
        }
        self.tensors.push(WeightTensor { name, dims, values });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&WeightTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut WeightTensor> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    pub fn tensors(&self) -> &[WeightTensor] {
        &self.tensors
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(WEIGHT_MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.dims.len() as u8);
            for &d in &t.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in &t.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DataError> {
        if bytes.len() < WEIGHT_MAGIC.len() + 1 + 4 + 4 {
            return Err(DataError::Truncated {
                needed: WEIGHT_MAGIC.len() + 9,
                available: bytes.len(),
            });
        }
        if &bytes[..8] != WEIGHT_MAGIC {
            return Err(DataError::BadMagic {
                expected: String::from_utf8_lossy(WEIGHT_MAGIC).into_owned(),
                found: String::from_utf8_lossy(&bytes[..8]).into_owned(),
            });
        }
        let (body, crc) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(crc.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(DataError::Checksum { stored, computed });
        }
        let mut r = Cursor { bytes: body, pos: 8 };
        let version = r.take(1)?[0];
        if version != VERSION {
            return Err(DataError::Version(version));
        }
        let count = r.u32()? as usize;
        let mut container = Self::new();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| DataError::Utf8)?
                .to_string();
            let rank = r.take(1)?[0] as usize;
            let dims = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let len = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| DataError::DimensionOverflow(format!("{name}: {dims:?}")))?;
            let values = r
                .take(len)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            container.push(name, dims, values)?;
        }
        if r.pos != body.len() {
            return Err(DataError::TrailingData {
                extra: body.len() - r.pos,
            });
        }
        Ok(container)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(DataError::Truncated {
                needed: self.pos.saturating_add(n),
                available: self.bytes.len(),
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, DataError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn write_weights(path: impl AsRef<Path>, weights: &WeightContainer) -> Result<(), DataError> {
    let path = path.as_ref();
    fs::write(path, weights.to_bytes()).map_err(|e| DataError::io(path, e))
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<WeightContainer, DataError> {
    let path = path.as_ref();
    WeightContainer::from_bytes(&fs::read(path).map_err(|e| DataError::io(path, e))?)
}

/// Deterministic uniform `[-0.5, 0.5]` weights for a named architecture.
pub fn fixture_weights(name: &str, seed: u64) -> Result<WeightContainer, DataError> {
    let spec = build_architecture(name)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut c = WeightContainer::new();
    for (tensor, dims) in spec.parameter_manifest()? {
        let len = dims.iter().product();
        let values = (0..len).map(|_| rng.random_range(-0.5f32..=0.5)).collect();
        c.push(tensor, dims, values)?;
    }
    Ok(c)
}
