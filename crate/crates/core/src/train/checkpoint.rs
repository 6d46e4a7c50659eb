//! Checkpoint file: a text header followed by little-endian `f32` data.
//!
//! ```text
//! TWEETCLF-CKPT 1
//! spec {"kind":"word",...}
//! tensor word.embedding.table 27064,100 0 2706400
//! ...
//! end
//! <payload>
//! ```
//!
//! Offsets and lengths count `f32` elements from the start of the payload.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, ModelKind, ModelParams, ModelSpec};
use crate::tensor::Tensor;

pub const MAGIC: &str = "TWEETCLF-CKPT";
pub const VERSION: u32 = 1;

/// Serialises `params` under `spec`. Values are written as `f32`.
pub fn checkpoint_bytes(spec: &ModelSpec, params: &ModelParams) -> Result<Vec<u8>> {
    let mut header = format!(
        "{MAGIC} {VERSION}\nspec {}\n",
        serde_json::to_string(&spec.config)?
    );
    let mut offset = 0usize;
    let tensors = params.named_tensors();
    for (name, t) in &tensors {
        let shape: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        header.push_str(&format!(
            "tensor {name} {} {offset} {}\n",
            shape.join(","),
            t.len()
        ));
        offset += t.len();
    }
    header.push_str("end\n");
    let mut bytes = header.into_bytes();
    bytes.reserve(offset * 4);
    for (_, t) in &tensors {
        for &v in t.data() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(bytes)
}

pub fn save_checkpoint(
    spec: &ModelSpec,
    params: &ModelParams,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = checkpoint_bytes(spec, params)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

fn parse_entry(line: &str) -> Result<Entry> {
    let parts: Vec<&str> = line.split(' ').collect();
    let [_, name, shape, offset, len] = parts[..] else {
        return Err(corrupt(format!("bad tensor line `{line}`")));
    };
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| corrupt(format!("bad number `{s}` in `{line}`")))
    };
    let shape = if shape.is_empty() {
        vec![]
    } else {
        shape.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    Ok(Entry {
        name: name.to_string(),
        shape,
        offset: num(offset)?,
        len: num(len)?,
    })
}

/// Parses a checkpoint image.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Model> {
    let mut pos = 0usize;
    let mut next_line = || -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| corrupt("truncated file: header ends early"))?;
        pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| corrupt("header is not UTF-8"))
    };

    let first = next_line()?;
    let version = first
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| corrupt("not a checkpoint file"))?;
    if version != VERSION.to_string() {
        return Err(corrupt(format!(
            "unsupported checkpoint version {version} (this build reads {VERSION})"
        )));
    }
    let spec_line = next_line()?;
    let json = spec_line
        .strip_prefix("spec ")
        .ok_or_else(|| corrupt("missing spec line"))?;
    let config: ModelConfig =
        serde_json::from_str(json).map_err(|e| corrupt(format!("bad spec: {e}")))?;
    let mut entries = Vec::new();
    loop {
        let line = next_line()?;
        if line == "end" {
            break;
        }
        entries.push(parse_entry(line)?);
    }
    let header_len = pos;

    let spec = ModelSpec::new(config)?;
    let mut params = ModelParams::zeros(&spec);
    let expected: Vec<(String, Vec<usize>)> = params
        .named_tensors()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    if expected.len() != entries.len() {
        return Err(corrupt(format!(
            "header lists {} tensors, the spec has {}",
            entries.len(),
            expected.len()
        )));
    }
    let payload = &bytes[header_len..];
    let total: usize = entries.iter().map(|e| e.len).sum();
    if payload.len() < total * 4 {
        return Err(corrupt(format!(
            "truncated file: payload has {} bytes, header needs {}",
            payload.len(),
            total * 4
        )));
    }
    if payload.len() > total * 4 {
        return Err(corrupt(format!(
            "{} trailing bytes after payload",
            payload.len() - total * 4
        )));
    }
    let mut tensors = Vec::with_capacity(entries.len());
    for (e, (name, shape)) in entries.iter().zip(&expected) {
        if &e.name != name || &e.shape != shape {
            return Err(corrupt(format!(
                "shape mismatch: header has {} {:?}, spec expects {name} {shape:?}",
                e.name, e.shape
            )));
        }
        if e.len != shape.iter().product::<usize>() || (e.offset + e.len) * 4 > payload.len() {
            return Err(corrupt(format!("bad extent for {}", e.name)));
        }
        let data: Vec<f64> = payload[e.offset * 4..(e.offset + e.len) * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        tensors.push(Tensor::new(shape.clone(), data)?);
    }
    params.assign_tensors(tensors)?;
    Ok(Model { spec, params })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}

/// Loads a checkpoint that must hold a `kind` model.
pub fn load_checkpoint_as(path: impl AsRef<Path>, kind: ModelKind) -> Result<Model> {
    let model = load_checkpoint(path)?;
    if model.kind() != kind {
        return Err(Error::SpecMismatch {
            expected: kind.to_string(),
            found: model.kind().to_string(),
        });
    }
    Ok(model)
}

/// Loads a checkpoint whose architecture must equal `config`.
pub fn load_checkpoint_for(path: impl AsRef<Path>, config: &ModelConfig) -> Result<Model> {
    let model = load_checkpoint(path)?;
    if &model.spec.config != config {
        return Err(Error::SpecMismatch {
            expected: serde_json::to_string(config)?,
            found: serde_json::to_string(&model.spec.config)?,
        });
    }
    Ok(model)
}
