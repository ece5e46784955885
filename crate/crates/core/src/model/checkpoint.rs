//! Binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! "S2T1" | version u32 | header_len u32 | header JSON (UTF-8)
//! | tensor_count u32
//! | per tensor: name_len u32 | name | rank u32 | dims u32 * rank | dtype u8 (0 = f32) | payload
//! | crc32 of every preceding byte
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Network, NetworkSpec};
use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"S2T1";
pub const CHECKPOINT_VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetadata {
    pub epoch: usize,
    pub best_val_mse: Option<f64>,
    pub rng_seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    network: NetworkSpec,
    metadata: CheckpointMetadata,
}

/// A decoded checkpoint: spec, metadata and the named tensors in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub metadata: CheckpointMetadata,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn from_network(network: &Network<f32>, metadata: CheckpointMetadata) -> Self {
        Self {
            spec: network.spec(),
            metadata,
            tensors: network
                .named_tensors()
                .into_iter()
                .map(|(n, t)| (n.to_string(), t.clone()))
                .collect(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&Header {
            network: self.spec,
            metadata: self.metadata.clone(),
        })
        .expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.dims().len() as u32).to_le_bytes());
            for &d in t.dims() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            out.push(DTYPE_F32);
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::CorruptCheckpoint(format!("{} bytes", bytes.len())));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::BadMagic(magic));
        }
        if bytes.len() < 12 {
            return Err(Error::CorruptCheckpoint("truncated header".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(crc_bytes.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::ChecksumMismatch { stored, computed });
        }

        let mut r = Reader { buf: body, pos: 8 };
        let header_len = r.u32()? as usize;
        let header: Header = serde_json::from_slice(r.take(header_len)?)
            .map_err(|e| Error::CorruptCheckpoint(format!("header: {e}")))?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::CorruptCheckpoint("tensor name is not UTF-8".into()))?;
            let rank = r.u32()? as usize;
            let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let dtype = r.take(1)?[0];
            if dtype != DTYPE_F32 {
                return Err(Error::CorruptCheckpoint(format!("{name}: unknown dtype code {dtype}")));
            }
            let n: usize = dims.iter().product();
            let payload = r.take(n * 4)?;
            let data = payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect();
            let tensor = Tensor::new(dims, data).map_err(|e| Error::CorruptCheckpoint(format!("{name}: {e}")))?;
            tensors.push((name, tensor));
        }
        if r.pos != body.len() {
            return Err(Error::CorruptCheckpoint(format!("{} trailing bytes", body.len() - r.pos)));
        }
        Ok(Self {
            spec: header.network,
            metadata: header.metadata,
            tensors,
        })
    }

    /// Copies the stored tensors into `network`, which must have the same layout.
    pub fn load_into(&self, network: &mut Network<f32>) -> Result<()> {
        let mut slots = network.named_tensors_mut();
        if slots.len() != self.tensors.len() {
            return Err(Error::CorruptCheckpoint(format!(
                "{} tensors stored, network has {}",
                self.tensors.len(),
                slots.len()
            )));
        }
        for ((name, slot), (stored_name, stored)) in slots.iter_mut().zip(&self.tensors) {
            if name != stored_name {
                return Err(Error::CorruptCheckpoint(format!("expected tensor {name}, found {stored_name}")));
            }
            if slot.dims() != stored.dims() {
                return Err(Error::TensorShapeMismatch {
                    name: name.to_string(),
                    expected: slot.dims().to_vec(),
                    found: stored.dims().to_vec(),
                });
            }
            **slot = stored.clone();
        }
        Ok(())
    }

    pub fn into_network(self) -> Result<Network<f32>> {
        let mut net = Network::zeros(self.spec)?;
        self.load_into(&mut net)?;
        Ok(net)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::CorruptCheckpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn save_checkpoint(network: &Network<f32>, metadata: CheckpointMetadata, path: &Path) -> Result<()> {
    let bytes = Checkpoint::from_network(network, metadata).encode();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(Network<f32>, CheckpointMetadata)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ckpt = Checkpoint::decode(&bytes).map_err(|e| e.at(path))?;
    let meta = ckpt.metadata.clone();
    Ok((ckpt.into_network().map_err(|e| e.at(path))?, meta))
}

/// Loads a checkpoint into a network of the requested spec, rejecting layout mismatches.
pub fn load_checkpoint_for(path: &Path, spec: NetworkSpec) -> Result<(Network<f32>, CheckpointMetadata)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ckpt = Checkpoint::decode(&bytes)?;
    let mut net = Network::zeros(spec)?;
    ckpt.load_into(&mut net)?;
    Ok((net, ckpt.metadata))
}
