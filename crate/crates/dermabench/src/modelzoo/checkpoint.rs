//! Versioned binary checkpoints.
//!
//! Layout: 4-byte magic `DMBC`, little-endian u32 format version, u32 JSON
//! header length, the JSON header, then every parameter tensor followed by
//! every buffer tensor (batch-norm running statistics) as raw little-endian
//! scalars in the model's stable visit order. Writes go through a temporary
//! file and an atomic rename so a crash never leaves a torn checkpoint.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modelzoo::backbones::{BackboneId, ScalePreset};
use crate::modelzoo::model::{build_model, BuildOptions, ClassifierModel, Preprocessing, WeightSource};
use crate::nn::Trainable;
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"DMBC";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub backbone_id: BackboneId,
    pub preset: ScalePreset,
    pub seed: u64,
    pub preprocessing: Preprocessing,
    pub dtype: String,
    /// Total scalar count of parameters, then of buffers; used to validate
    /// that the payload is complete.
    pub param_scalars: u64,
    pub buffer_scalars: u64,
    pub created_at: String,
}

fn dtype_name<S: Real>() -> &'static str {
    match std::mem::size_of::<S>() {
        4 => "f32",
        8 => "f64",
        _ => unreachable!("scalars are f32 or f64"),
    }
}

fn push_scalar<S: Real>(out: &mut Vec<u8>, v: S) {
    if std::mem::size_of::<S>() == 4 {
        out.extend_from_slice(&(v.to_f64_c() as f32).to_le_bytes());
    } else {
        out.extend_from_slice(&v.to_f64_c().to_le_bytes());
    }
}

fn read_scalar<S: Real>(bytes: &[u8], index: usize) -> Option<S> {
    let width = std::mem::size_of::<S>();
    let at = index * width;
    let chunk = bytes.get(at..at + width)?;
    Some(if width == 4 {
        S::from_f64_c(f32::from_le_bytes(chunk.try_into().unwrap()) as f64)
    } else {
        S::from_f64_c(f64::from_le_bytes(chunk.try_into().unwrap()))
    })
}

fn state_counts<S: Real>(model: &mut ClassifierModel<S>) -> (u64, u64) {
    let mut params = 0u64;
    model.visit_params(&mut |p| params += p.value.len() as u64);
    let mut buffers = 0u64;
    model.graph.visit_buffers(&mut |b| buffers += b.len() as u64);
    (params, buffers)
}

pub fn save_checkpoint<S: Real>(model: &mut ClassifierModel<S>, path: &Path) -> Result<()> {
    let (param_scalars, buffer_scalars) = state_counts(model);
    let header = CheckpointHeader {
        backbone_id: model.backbone_id,
        preset: model.preset,
        seed: model.seed,
        preprocessing: model.preprocessing,
        dtype: dtype_name::<S>().to_string(),
        param_scalars,
        buffer_scalars,
        created_at: chrono::Utc::now().to_rfc3339(),
    };
    let header_json = serde_json::to_vec(&header)?;

    let mut bytes = Vec::with_capacity(
        12 + header_json.len()
            + (param_scalars + buffer_scalars) as usize * std::mem::size_of::<S>(),
    );
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    model.visit_params(&mut |p| {
        for &v in p.value.iter() {
            push_scalar(&mut bytes, v);
        }
    });
    model.graph.visit_buffers(&mut |b| {
        for &v in b.iter() {
            push_scalar(&mut bytes, v);
        }
    });

    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let tmp = path.with_extension("dmbc.tmp");
    {
        let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        file.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
        file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_header(path: &Path) -> Result<CheckpointHeader> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_header(&bytes).map(|(h, _)| h)
}

fn parse_header(bytes: &[u8]) -> Result<(CheckpointHeader, usize)> {
    let fail = |what: &str| Error::CheckpointIntegrity(what.to_string());
    if bytes.len() < 12 || &bytes[0..4] != MAGIC {
        return Err(fail("missing magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_bytes = bytes
        .get(12..12 + header_len)
        .ok_or_else(|| fail("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(header_bytes)
        .map_err(|e| Error::CheckpointIntegrity(format!("bad header: {e}")))?;
    Ok((header, 12 + header_len))
}

/// Load weights from `path` into an already-built model. The checkpoint must
/// match the model's backbone, preset and scalar type exactly.
pub fn load_weights_into<S: Real>(model: &mut ClassifierModel<S>, path: &Path) -> Result<()> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, payload_at) = parse_header(&bytes)?;
    if header.backbone_id != model.backbone_id || header.preset != model.preset {
        return Err(Error::CheckpointMismatch(format!(
            "checkpoint holds {} ({}), model is {} ({})",
            header.backbone_id,
            header.preset.slug(),
            model.backbone_id,
            model.preset.slug()
        )));
    }
    if header.dtype != dtype_name::<S>() {
        return Err(Error::CheckpointMismatch(format!(
            "checkpoint dtype {} does not match model dtype {}",
            header.dtype,
            dtype_name::<S>()
        )));
    }
    let (param_scalars, buffer_scalars) = state_counts(model);
    if header.param_scalars != param_scalars || header.buffer_scalars != buffer_scalars {
        return Err(Error::CheckpointIntegrity(format!(
            "payload declares {}+{} scalars, model has {}+{}",
            header.param_scalars, header.buffer_scalars, param_scalars, buffer_scalars
        )));
    }
    let payload = &bytes[payload_at..];
    let total = (param_scalars + buffer_scalars) as usize;
    if payload.len() != total * std::mem::size_of::<S>() {
        return Err(Error::CheckpointIntegrity(format!(
            "payload is {} bytes, expected {}",
            payload.len(),
            total * std::mem::size_of::<S>()
        )));
    }
    let mut index = 0usize;
    model.visit_params(&mut |p| {
        for v in p.value.iter_mut() {
            *v = read_scalar(payload, index).expect("length checked above");
            index += 1;
        }
    });
    model.graph.visit_buffers(&mut |b| {
        for v in b.iter_mut() {
            *v = read_scalar(payload, index).expect("length checked above");
            index += 1;
        }
    });
    model.seed = header.seed;
    Ok(())
}

/// Rebuild the model a checkpoint describes and load its weights.
pub fn load_checkpoint<S: Real>(path: &Path) -> Result<ClassifierModel<S>> {
    let header = read_header(path)?;
    let mut model = build_model(
        header.backbone_id,
        &BuildOptions {
            preset: header.preset,
            seed: header.seed,
            weights: WeightSource::Seeded,
            ..BuildOptions::default()
        },
    )?;
    load_weights_into(&mut model, path)?;
    Ok(model)
}
