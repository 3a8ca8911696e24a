//! Checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"SCNETCKP"             8-byte magic
//! u32 version             currently 1
//! u64 header_len
//! header_len bytes        JSON header (see `Header`)
//! f64 × Σ numel           parameter values, tensors in header order
//! f64 × Σ numel × 2       Adam first then second moments (only when the
//!                         header has an `optimizer` entry)
//! ```
//!
//! Values are stored as raw IEEE-754 bits, so a save/load cycle restores
//! parameters bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::numerics::Tensor;

use super::adam::{Adam, AdamHyper};
use super::data::TrainConfig;

pub const MAGIC: &[u8; 8] = b"SCNETCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerEntry {
    hyper: AdamHyper,
    step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ModelConfig,
    train: Option<TrainConfig>,
    seed: u64,
    step: u64,
    tensors: Vec<TensorEntry>,
    optimizer: Option<OptimizerEntry>,
}

/// Everything needed to rebuild a model and resume its optimizer.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub train: Option<TrainConfig>,
    pub seed: u64,
    pub step: u64,
    pub optimizer: Option<Adam>,
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let store = &self.model.params;
        let header = Header {
            model: self.model.cfg.clone(),
            train: self.train.clone(),
            seed: self.seed,
            step: self.step,
            tensors: store
                .ids()
                .map(|id| TensorEntry { name: store.name(id).to_string(), shape: store.get(id).shape().to_vec() })
                .collect(),
            optimizer: self.optimizer.as_ref().map(|a| OptimizerEntry { hyper: a.hyper, step: a.step }),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(20 + json.len() + 8 * store.numel() * 3);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for id in store.ids() {
            put_f64s(&mut out, store.get(id).data());
        }
        if let Some(adam) = &self.optimizer {
            adam.m.iter().for_each(|m| put_f64s(&mut out, m));
            adam.v.iter().for_each(|v| put_f64s(&mut out, v));
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let len = u64::from_le_bytes(r.take(8)?.try_into().unwrap()) as usize;
        let header: Header =
            serde_json::from_slice(r.take(len)?).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
        let mut model = Model::new(header.model.clone(), header.seed)?;
        if model.params.len() != header.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "{} tensors stored, configuration defines {}",
                header.tensors.len(),
                model.params.len()
            )));
        }
        let ids: Vec<_> = model.params.ids().collect();
        for (id, entry) in ids.iter().zip(&header.tensors) {
            if model.params.name(*id) != entry.name || model.params.get(*id).shape() != entry.shape.as_slice() {
                return Err(Error::Checkpoint(format!("tensor `{}` {:?} does not match the model", entry.name, entry.shape)));
            }
            let n = entry.shape.iter().product();
            model.params.set(*id, Tensor::new(&entry.shape, r.f64s(n)?)?)?;
        }
        let optimizer = match &header.optimizer {
            Some(o) => {
                let sizes: Vec<usize> = header.tensors.iter().map(|t| t.shape.iter().product()).collect();
                let m = sizes.iter().map(|&n| r.f64s(n)).collect::<Result<Vec<_>>>()?;
                let v = sizes.iter().map(|&n| r.f64s(n)).collect::<Result<Vec<_>>>()?;
                Some(Adam { hyper: o.hyper, step: o.step, m, v })
            }
            None => None,
        };
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { model, train: header.train, seed: header.seed, step: header.step, optimizer })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated: need {n} bytes at offset {}, file has {}", self.pos, self.bytes.len()))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n * 8)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let model = Model::new(ModelConfig::tiny(), 11).unwrap();
        let mut adam = Adam::new(&model.params);
        adam.step = 3;
        adam.m[0][0] = 0.125;
        let ck = Checkpoint { model, train: Some(TrainConfig::default()), seed: 11, step: 3, optimizer: Some(adam) };
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.optimizer, ck.optimizer);
        for id in ck.model.params.ids() {
            assert_eq!(ck.model.params.get(id).data(), back.model.params.get(id).data());
        }
    }

    #[test]
    fn truncation_is_reported() {
        let ck = Checkpoint { model: Model::new(ModelConfig::tiny(), 0).unwrap(), train: None, seed: 0, step: 0, optimizer: None };
        let bytes = ck.to_bytes().unwrap();
        assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Checkpoint(_))));
        assert!(matches!(Checkpoint::from_bytes(b"nope"), Err(Error::Checkpoint(_))));
    }
}
