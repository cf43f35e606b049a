//! Single-file checkpoint container.
//!
//! Layout: 8-byte magic `RETVICKP`, little-endian `u32` format version,
//! little-endian `u64` header length, a JSON header (config snapshot,
//! counters, backbone identity, tensor index) and the concatenated raw
//! little-endian tensor payload.

use std::collections::BTreeMap;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use crate::cfa::Cfa;
use crate::error::{Error, Result};
use crate::losses::BackboneIdentity;
use crate::nn::{self, ParamStore};

use super::TrainConfig;

pub const MAGIC: &[u8; 8] = b"RETVICKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub epoch: usize,
    pub step: usize,
    pub backbone: BackboneIdentity,
    /// Update counts of the optimizers, by name.
    pub optimizer_steps: BTreeMap<String, u64>,
    /// Network weights, normalization buffers and optimizer moments.
    pub tensors: BTreeMap<String, Tensor>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    offset: u64,
    len: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    config: TrainConfig,
    epoch: usize,
    step: usize,
    backbone: BackboneIdentity,
    optimizer_steps: BTreeMap<String, u64>,
    tensors: Vec<TensorEntry>,
}

fn dtype_name(dtype: DType) -> Result<&'static str> {
    match dtype {
        DType::F32 => Ok("f32"),
        DType::F64 => Ok("f64"),
        other => Err(Error::Config(format!("cannot checkpoint dtype {other:?}"))),
    }
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut payload = Vec::new();
        let mut entries = Vec::with_capacity(self.tensors.len());
        for (name, t) in &self.tensors {
            let bytes = nn::tensor_le_bytes(t)?;
            entries.push(TensorEntry {
                name: name.clone(),
                dtype: dtype_name(t.dtype())?.into(),
                shape: t.dims().to_vec(),
                offset: payload.len() as u64,
                len: bytes.len() as u64,
            });
            payload.extend_from_slice(&bytes);
        }
        let header = Header {
            version: FORMAT_VERSION,
            config: self.config.clone(),
            epoch: self.epoch,
            step: self.step,
            backbone: self.backbone.clone(),
            optimizer_steps: self.optimizer_steps.clone(),
            tensors: entries,
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Config(e.to_string()))?;
        let mut out = Vec::with_capacity(20 + json.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 {
            return Err(parse_err("checkpoint shorter than its fixed header"));
        }
        if &bytes[..8] != MAGIC {
            return Err(parse_err("not a checkpoint file (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::IncompatibleCheckpoint(format!(
                "format version {version}, this build reads {FORMAT_VERSION}"
            )));
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = &bytes[20..];
        if header_len > body.len() {
            return Err(parse_err("checkpoint header is truncated"));
        }
        let header: Header = serde_json::from_slice(&body[..header_len])
            .map_err(|e| parse_err(format!("checkpoint header: {e}")))?;
        if header.version != FORMAT_VERSION {
            return Err(Error::IncompatibleCheckpoint(format!(
                "header version {}, this build reads {FORMAT_VERSION}",
                header.version
            )));
        }
        let payload = &body[header_len..];
        let mut tensors = BTreeMap::new();
        for e in header.tensors {
            let (start, len) = (e.offset as usize, e.len as usize);
            let end = start
                .checked_add(len)
                .filter(|&end| end <= payload.len())
                .ok_or_else(|| parse_err(format!("tensor {} is truncated", e.name)))?;
            let raw = &payload[start..end];
            let count: usize = e.shape.iter().product();
            let t = match e.dtype.as_str() {
                "f32" if len == count * 4 => {
                    let v: Vec<f32> = raw
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                        .collect();
                    Tensor::from_vec(v, e.shape.as_slice(), &Device::Cpu)?
                }
                "f64" if len == count * 8 => {
                    let v: Vec<f64> = raw
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                        .collect();
                    Tensor::from_vec(v, e.shape.as_slice(), &Device::Cpu)?
                }
                other => {
                    return Err(parse_err(format!(
                        "tensor {} has dtype {other} and {len} bytes for shape {:?}",
                        e.name, e.shape
                    )))
                }
            };
            tensors.insert(e.name, t);
        }
        Ok(Self {
            config: header.config,
            epoch: header.epoch,
            step: header.step,
            backbone: header.backbone,
            optimizer_steps: header.optimizer_steps,
            tensors,
        })
    }

    /// Writes to a sibling temporary file, then renames into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("ckpt.tmp");
        std::fs::write(&tmp, self.to_bytes()?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// A warning when the recorded backbone differs from `actual`.
    pub fn backbone_warning(&self, actual: &BackboneIdentity) -> Option<String> {
        (self.backbone != *actual).then(|| {
            format!(
                "checkpoint was trained against backbone {} ({}), current backbone is {} ({})",
                self.backbone.name, self.backbone.checksum, actual.name, actual.checksum
            )
        })
    }

    /// The retargeting network with this checkpoint's weights.
    pub fn cfa(&self, dtype: DType) -> Result<(Cfa, ParamStore)> {
        let (cfa, store) = Cfa::seeded(self.config.cfa.clone(), dtype, 0)?;
        store.load(&self.tensors)?;
        Ok((cfa, store))
    }
}
