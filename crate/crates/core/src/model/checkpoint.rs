//! Single-file model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"ROPESAT1"
//! u64 header length, header JSON {"config": ..., "metadata": ...}
//! u64 tensor count
//! per tensor: u32 name length, name (UTF-8), u32 rank, u64 dims[rank],
//!             f64 data[product(dims)]
//! ```
//!
//! Batch-norm running statistics are stored as the tensors
//! `head.bn.running_mean` and `head.bn.running_var`.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelParams, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ROPESAT1";
const RUNNING_MEAN: &str = "head.bn.running_mean";
const RUNNING_VAR: &str = "head.bn.running_var";

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    #[serde(default)]
    metadata: serde_json::Value,
}

pub fn encode(params: &ModelParams, metadata: &serde_json::Value) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        config: params.config.clone(),
        metadata: metadata.clone(),
    })?;
    let mut out = Vec::with_capacity(header.len() + 8 * params.num_parameters() + 1024);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    let c = params.running_mean.len();
    let stats = [
        (RUNNING_MEAN.to_string(), Tensor::new(vec![c], params.running_mean.clone())),
        (RUNNING_VAR.to_string(), Tensor::new(vec![c], params.running_var.clone())),
    ];
    let all: Vec<(&String, &Tensor)> = params
        .tensors
        .iter()
        .chain(stats.iter().map(|(n, t)| (n, t)))
        .collect();
    out.extend_from_slice(&(all.len() as u64).to_le_bytes());
    for (name, t) in all {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
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
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Checkpoint(format!("length {v} too large")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<(ModelParams, serde_json::Value)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Checkpoint("missing ROPESAT1 header".into()));
    }
    let hlen = r.u64()?;
    let header: Header = serde_json::from_slice(r.take(hlen)?)
        .map_err(|e| Error::Checkpoint(format!("header JSON: {e}")))?;
    let count = r.u64()?;
    let mut tensors = IndexMap::new();
    for _ in 0..count {
        let nlen = r.u32()?;
        let name = std::str::from_utf8(r.take(nlen)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Checkpoint(format!("tensor `{name}` is too large")))?;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("overflow".into()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if tensors.insert(name.clone(), Tensor::new(shape, data)).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor `{name}`")));
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after the last tensor".into()));
    }
    let mut take_stat = |name: &str| {
        tensors
            .shift_remove(name)
            .map(|t| t.data)
            .ok_or_else(|| Error::Checkpoint(format!("missing `{name}`")))
    };
    let mean = take_stat(RUNNING_MEAN)?;
    let var = take_stat(RUNNING_VAR)?;
    let params = ModelParams::from_parts(header.config, tensors, mean, var)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok((params, header.metadata))
}

pub fn save_checkpoint(
    params: &ModelParams,
    metadata: &serde_json::Value,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(params, metadata)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams, serde_json::Value)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelParams {
        let cfg = ModelConfig {
            input_length: 24,
            embed_dim: 8,
            num_heads: 2,
            num_encoder_blocks: 1,
            head_conv_channels: 3,
            fc_hidden: 5,
            ..Default::default()
        };
        let mut p = ModelParams::init(&cfg).unwrap();
        p.running_mean = vec![0.5, -1.0, 2.0];
        p.running_var = vec![0.25, 3.0, 1.5];
        p
    }

    #[test]
    fn round_trip_is_exact() {
        let p = tiny();
        let meta = serde_json::json!({"class_names": ["a", "b", "c"], "seed": 4});
        let (q, m) = decode(&encode(&p, &meta).unwrap()).unwrap();
        assert_eq!(q.config, p.config);
        assert_eq!(q.tensors, p.tensors);
        assert_eq!(q.running_mean, p.running_mean);
        assert_eq!(q.running_var, p.running_var);
        assert_eq!(m, meta);
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = encode(&tiny(), &serde_json::Value::Null).unwrap();
        assert!(decode(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(decode(&extra).is_err());
    }
}
