//! Model files: a JSON manifest plus a raw little-endian f64 payload.
//!
//! `model.json` names its payload (`model.bin` by default) and records the
//! SHA-256 of the payload bytes. Arrays are concatenated in manifest order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baseline::LinearModel;
use crate::error::{Error, Result};
use crate::netcore::{ModelParams, NetworkSpec};
use crate::preprocess::{PipelineFile, PreprocessPipeline};
use crate::training::{Predictor, TrainConfig, TrainedModel, TrainingHistory, UnitSplit};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the payload, in f64 elements.
    pub offset: usize,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub model: String,
    pub network: Option<NetworkSpec>,
    pub linear_ridge: Option<f64>,
    pub params: Vec<ParamEntry>,
    pub payload: String,
    pub payload_len: usize,
    pub sha256: String,
    pub target_scale: f64,
    pub pipeline: PipelineFile,
    pub config: TrainConfig,
    pub history: TrainingHistory,
    pub split: Option<UnitSplit>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn payload_path(manifest_path: &Path, name: &str) -> PathBuf {
    manifest_path
        .parent()
        .map(|d| d.join(name))
        .unwrap_or_else(|| PathBuf::from(name))
}

fn linear_arrays(m: &LinearModel) -> Vec<(String, Vec<usize>, Vec<f64>)> {
    vec![
        ("linear.weights".into(), vec![m.weights.len()], m.weights.clone()),
        ("linear.intercept".into(), vec![1], vec![m.intercept]),
    ]
}

/// Manifest and payload bytes for `model`, without touching the disk.
pub fn encode_model(model: &TrainedModel, payload_name: &str) -> Result<(ModelManifest, Vec<u8>)> {
    let arrays: Vec<(String, Vec<usize>, Vec<f64>, bool)> = match &model.predictor {
        Predictor::Network { params, .. } => params
            .arrays()
            .into_iter()
            .map(|p| (p.name, p.shape, p.data.to_vec(), p.trainable))
            .collect(),
        Predictor::Linear(m) => linear_arrays(m)
            .into_iter()
            .map(|(n, s, d)| (n, s, d, true))
            .collect(),
    };
    let mut entries = Vec::with_capacity(arrays.len());
    let mut bytes = Vec::new();
    let mut offset = 0;
    for (name, shape, data, trainable) in arrays {
        for v in &data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        entries.push(ParamEntry {
            name,
            shape,
            offset,
            trainable,
        });
        offset += data.len();
    }
    let (network, linear_ridge) = match &model.predictor {
        Predictor::Network { spec, .. } => (Some(spec.clone()), None),
        Predictor::Linear(m) => (None, Some(m.ridge)),
    };
    let manifest = ModelManifest {
        format_version: MODEL_FORMAT_VERSION,
        model: model.config.model.id().to_string(),
        network,
        linear_ridge,
        params: entries,
        payload: payload_name.to_string(),
        payload_len: bytes.len(),
        sha256: sha256_hex(&bytes),
        target_scale: model.target_scale,
        pipeline: model.pipeline.to_file()?,
        config: model.config.clone(),
        history: model.history.clone(),
        split: model.split.clone(),
    };
    Ok((manifest, bytes))
}

/// Writes `path` (the manifest) and the payload next to it, with the same
/// stem and a `.bin` extension.
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let bin = path.with_extension("bin");
    let name = bin
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| Error::Usage(format!("invalid model path {}", path.display())))?;
    let (manifest, bytes) = encode_model(model, &name)?;
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&bin, &bytes).map_err(|e| Error::io(&bin, e))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn decode_values(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect()
}

fn check_entries(entries: &[ParamEntry], expected: &[(String, Vec<usize>)], total: usize) -> Result<()> {
    if entries.len() != expected.len() {
        return Err(Error::Corruption(format!(
            "manifest lists {} parameter arrays, the model needs {}",
            entries.len(),
            expected.len()
        )));
    }
    let mut offset = 0;
    for (e, (name, shape)) in entries.iter().zip(expected) {
        if &e.name != name || &e.shape != shape || e.offset != offset {
            return Err(Error::Corruption(format!(
                "parameter {} {:?} at {} does not match expected {name} {shape:?} at {offset}",
                e.name, e.shape, e.offset
            )));
        }
        offset += shape.iter().product::<usize>();
    }
    if offset != total {
        return Err(Error::Corruption(format!(
            "payload holds {total} values, manifest describes {offset}"
        )));
    }
    Ok(())
}

/// Rebuilds a model from its manifest and payload bytes.
pub fn decode_model(manifest: &ModelManifest, bytes: &[u8]) -> Result<TrainedModel> {
    if manifest.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Version {
            found: manifest.format_version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    if bytes.len() != manifest.payload_len || bytes.len() % 8 != 0 {
        return Err(Error::Corruption(format!(
            "payload is {} bytes, manifest says {}",
            bytes.len(),
            manifest.payload_len
        )));
    }
    let actual = sha256_hex(bytes);
    if actual != manifest.sha256 {
        return Err(Error::Checksum {
            expected: manifest.sha256.clone(),
            actual,
        });
    }
    if manifest.model != manifest.config.model.id() {
        return Err(Error::Corruption(format!(
            "manifest model {} vs config model {}",
            manifest.model, manifest.config.model
        )));
    }
    let values = decode_values(bytes);
    let pipeline = PreprocessPipeline::from_file(&manifest.pipeline)?;
    let predictor = match (&manifest.network, manifest.linear_ridge) {
        (Some(spec), None) => {
            spec.validate().map_err(|e| Error::Corruption(e.to_string()))?;
            if spec.input_features != pipeline.n_features()? {
                return Err(Error::Corruption(format!(
                    "network expects {} features, pipeline yields {}",
                    spec.input_features,
                    pipeline.n_features()?
                )));
            }
            let mut params = ModelParams::init(spec, 0)?.zeros_like();
            let expected: Vec<_> = params.arrays().into_iter().map(|p| (p.name, p.shape)).collect();
            check_entries(&manifest.params, &expected, values.len())?;
            for (p, e) in params.arrays_mut().into_iter().zip(&manifest.params) {
                p.data.copy_from_slice(&values[e.offset..e.offset + p.data.len()]);
            }
            Predictor::Network {
                spec: spec.clone(),
                params,
            }
        }
        (None, Some(ridge)) => {
            let f = pipeline.n_features()?;
            let expected = vec![
                ("linear.weights".to_string(), vec![f]),
                ("linear.intercept".to_string(), vec![1]),
            ];
            check_entries(&manifest.params, &expected, values.len())?;
            Predictor::Linear(LinearModel {
                weights: values[..f].to_vec(),
                intercept: values[f],
                ridge,
            })
        }
        _ => {
            return Err(Error::Corruption(
                "manifest must describe exactly one of a network or a linear model".into(),
            ))
        }
    };
    Ok(TrainedModel {
        config: manifest.config.clone(),
        pipeline,
        predictor,
        history: manifest.history.clone(),
        target_scale: manifest.target_scale,
        split: manifest.split.clone(),
    })
}

pub fn load_manifest(path: &Path) -> Result<ModelManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    // Check the version before the schema so old or future files get a clear error.
    if let Some(v) = value.get("format_version").and_then(|v| v.as_u64()) {
        if v != u64::from(MODEL_FORMAT_VERSION) {
            return Err(Error::Version {
                found: v as u32,
                expected: MODEL_FORMAT_VERSION,
            });
        }
    }
    Ok(serde_json::from_value(value)?)
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let manifest = load_manifest(path)?;
    let bin = payload_path(path, &manifest.payload);
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    decode_model(&manifest, &bytes)
}

/// Writes `history` as CSV.
pub fn save_history_csv(history: &TrainingHistory, path: &Path) -> Result<()> {
    fs::write(path, history.to_csv()).map_err(|e| Error::io(path, e))
}
