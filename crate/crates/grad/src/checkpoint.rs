//! Parameter checkpoints.
//!
//! Layout: an 8-byte little-endian header length, a JSON header listing the
//! parameter names and shapes, then every value as a little-endian `f32` in
//! row-major order, parameters in header order.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{GradError, Result};
use crate::params::ModelParams;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dtype: String,
    params: Vec<Entry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: [usize; 2],
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GradError + '_ {
    move |source| GradError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn encode_checkpoint(params: &ModelParams) -> Vec<u8> {
    let header = Header {
        dtype: "f32".into(),
        params: params
            .iter()
            .map(|(_, p)| Entry {
                name: p.name.clone(),
                shape: [p.value.nrows(), p.value.ncols()],
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(8 + json.len() + 4 * params.n_scalars());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, p) in params.iter() {
        for &v in p.value.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
    let bad = |m: &str| GradError::Checkpoint(m.to_string());
    let len_bytes: [u8; 8] = bytes.get(..8).ok_or_else(|| bad("truncated header length"))?.try_into().unwrap();
    let len = usize::try_from(u64::from_le_bytes(len_bytes)).map_err(|_| bad("header too large"))?;
    let json = bytes.get(8..8 + len).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| GradError::Checkpoint(e.to_string()))?;
    if header.dtype != "f32" {
        return Err(GradError::Checkpoint(format!("unsupported dtype `{}`", header.dtype)));
    }
    let mut body = &bytes[8 + len..];
    let mut params = ModelParams::new();
    for e in header.params {
        let n = e.shape[0] * e.shape[1];
        if body.len() < 4 * n {
            return Err(bad("truncated values"));
        }
        let vals: Vec<f32> = body[..4 * n]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        body = &body[4 * n..];
        let value = Array2::from_shape_vec((e.shape[0], e.shape[1]), vals).expect("length checked");
        params.add(e.name, value)?;
    }
    if !body.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Ok(params)
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(params)).map_err(io_err(path))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    decode_checkpoint(&fs::read(path).map_err(io_err(path))?)
}

/// Overwrites the values of `params` from a checkpoint with matching names
/// and shapes. Optimizer state is left alone.
pub fn restore_into(params: &mut ModelParams, path: &Path) -> Result<()> {
    let loaded = load_checkpoint(path)?;
    if loaded.len() != params.len() {
        return Err(GradError::Checkpoint(format!(
            "checkpoint has {} parameters, model has {}",
            loaded.len(),
            params.len()
        )));
    }
    for (_, p) in loaded.iter() {
        let id = params.id(&p.name)?;
        let dst = params.value_mut(id);
        if dst.dim() != p.value.dim() {
            return Err(GradError::Checkpoint(format!("shape of `{}` differs", p.name)));
        }
        dst.assign(&p.value);
    }
    Ok(())
}
