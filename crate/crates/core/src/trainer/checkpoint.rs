//! Binary checkpoints: an 8-byte magic, a format version, a JSON header and
//! the raw little-endian tensor payload in header order.

use std::fs;
use std::io::Write;
use std::path::Path;

use scanet_autograd::optim::AdamSlot;
use scanet_autograd::{Adam, ParamStore};
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::error::{io_err, Error, Result};

pub const MAGIC: &[u8; 8] = b"SCANETCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Entry {
    name: String,
    dtype: DType,
    shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct OptimHeader {
    name: String,
    lr: f64,
    /// `(parameter, completed steps)`; moments are stored as tensors
    /// `optim.<name>.<parameter>.m` / `.v`.
    slots: Vec<(String, u64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    epoch: usize,
    step: u64,
    config: TrainConfig,
    entries: Vec<Entry>,
    optimizers: Vec<OptimHeader>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

/// Everything needed to resume training or run inference.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    /// Completed epochs.
    pub epoch: usize,
    pub step: u64,
    pub config: TrainConfig,
    tensors: Vec<(String, Vec<usize>, TensorData)>,
    optimizers: Vec<OptimHeader>,
}

impl Checkpoint {
    pub fn new(epoch: usize, step: u64, config: TrainConfig) -> Self {
        Self {
            epoch,
            step,
            config,
            tensors: Vec::new(),
            optimizers: Vec::new(),
        }
    }

    pub fn add_params(&mut self, store: &ParamStore<f32>) {
        for (name, p) in store.iter() {
            self.tensors
                .push((name.to_string(), p.shape(), TensorData::F32(p.tensor().to_vec())));
        }
    }

    pub fn add_optimizer(&mut self, name: &str, adam: &Adam) {
        let mut slots = Vec::new();
        for s in adam.slots() {
            slots.push((s.name.clone(), s.step));
            for (suffix, v) in [("m", &s.m), ("v", &s.v)] {
                self.tensors.push((
                    format!("optim.{name}.{}.{suffix}", s.name),
                    vec![v.len()],
                    TensorData::F64(v.clone()),
                ));
            }
        }
        self.optimizers.push(OptimHeader {
            name: name.to_string(),
            lr: adam.config.lr,
            slots,
        });
    }

    pub fn tensor_names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, ..)| n.as_str())
    }

    fn find(&self, name: &str) -> Option<&(String, Vec<usize>, TensorData)> {
        self.tensors.iter().find(|(n, ..)| n == name)
    }

    /// Copies every parameter of `store` out of the checkpoint, checking
    /// names and shapes first so a failure leaves `store` untouched.
    pub fn restore_params(&self, store: &ParamStore<f32>) -> Result<()> {
        let mut staged = Vec::with_capacity(store.len());
        for (name, p) in store.iter() {
            let (_, shape, data) = self
                .find(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing entry `{name}`")))?;
            if *shape != p.shape() {
                return Err(Error::Checkpoint(format!(
                    "shape mismatch for `{name}`: checkpoint {shape:?}, model {:?}",
                    p.shape()
                )));
            }
            let TensorData::F32(v) = data else {
                return Err(Error::Checkpoint(format!("`{name}` is not an f32 tensor")));
            };
            staged.push((p, v.clone()));
        }
        for (p, v) in staged {
            p.set(v)?;
        }
        Ok(())
    }

    pub fn restore_optimizer(&self, name: &str, adam: &mut Adam) -> Result<()> {
        let header = self
            .optimizers
            .iter()
            .find(|o| o.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing optimizer `{name}`")))?;
        let mut slots = Vec::with_capacity(header.slots.len());
        for (param, step) in &header.slots {
            let moment = |suffix: &str| -> Result<Vec<f64>> {
                let key = format!("optim.{name}.{param}.{suffix}");
                match self.find(&key) {
                    Some((_, _, TensorData::F64(v))) => Ok(v.clone()),
                    _ => Err(Error::Checkpoint(format!("missing or mistyped entry `{key}`"))),
                }
            };
            slots.push(AdamSlot {
                name: param.clone(),
                step: *step,
                m: moment("m")?,
                v: moment("v")?,
            });
        }
        adam.load_slots(slots).map_err(|e| Error::Checkpoint(format!("optimizer `{name}`: {e}")))?;
        adam.set_lr(header.lr);
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            epoch: self.epoch,
            step: self.step,
            config: self.config.clone(),
            entries: self
                .tensors
                .iter()
                .map(|(name, shape, data)| Entry {
                    name: name.clone(),
                    dtype: match data {
                        TensorData::F32(_) => DType::F32,
                        TensorData::F64(_) => DType::F64,
                    },
                    shape: shape.clone(),
                })
                .collect(),
            optimizers: self.optimizers.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serialises");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, _, data) in &self.tensors {
            match data {
                TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let json = bytes.get(20..20 + len).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(json).map_err(|source| Error::Json {
            context: "checkpoint header".into(),
            source,
        })?;
        let mut pos = 20 + len;
        let mut tensors = Vec::with_capacity(header.entries.len());
        for e in header.entries {
            let n: usize = e.shape.iter().product();
            let width = match e.dtype {
                DType::F32 => 4,
                DType::F64 => 8,
            };
            let chunk = bytes
                .get(pos..pos + n * width)
                .ok_or_else(|| Error::Checkpoint(format!("truncated data for `{}`", e.name)))?;
            pos += n * width;
            let data = match e.dtype {
                DType::F32 => TensorData::F32(
                    chunk
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                        .collect(),
                ),
                DType::F64 => TensorData::F64(
                    chunk
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                        .collect(),
                ),
            };
            tensors.push((e.name, e.shape, data));
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes after tensor data"));
        }
        Ok(Self {
            epoch: header.epoch,
            step: header.step,
            config: header.config,
            tensors,
            optimizers: header.optimizers,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(io_err(path))?;
        f.write_all(&self.to_bytes()).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(io_err(path))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_foreign_bytes_and_versions() {
        assert!(Checkpoint::from_bytes(b"definitely not a checkpoint").is_err());
        let mut bytes = Checkpoint::new(0, 0, TrainConfig::default()).to_bytes();
        bytes[8] = 99;
        let err = Checkpoint::from_bytes(&bytes).unwrap_err().to_string();
        assert!(err.contains("version 99"), "{err}");
    }
}
