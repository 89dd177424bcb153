//! Versioned JSON checkpoints.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{AdamState, FeatureScaler, GnnModel, GnnParams};
use super::GnnConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AdamFile {
    step: u64,
    m: Vec<NamedTensor>,
    v: Vec<NamedTensor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    config: GnnConfig,
    scalers: Vec<FeatureScaler>,
    parameters: Vec<NamedTensor>,
    adam: Option<AdamFile>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

fn export(p: &GnnParams) -> Vec<NamedTensor> {
    p.named_tensors()
        .into_iter()
        .map(|(name, t)| NamedTensor {
            name,
            shape: [t.nrows(), t.ncols()],
            data: t.iter().copied().collect(),
        })
        .collect()
}

fn import(into: &mut GnnParams, tensors: &[NamedTensor]) -> Result<()> {
    let names: Vec<String> = into.named_tensors().into_iter().map(|(n, _)| n).collect();
    if names.len() != tensors.len() {
        return Err(Error::DimensionMismatch { expected: names.len(), got: tensors.len() });
    }
    for ((name, dst), src) in names.iter().zip(into.tensors_mut()).zip(tensors) {
        if *name != src.name {
            return Err(Error::InvalidConfig(format!("expected tensor {name}, found {}", src.name)));
        }
        if [dst.nrows(), dst.ncols()] != src.shape || src.data.len() != dst.len() {
            return Err(Error::InvalidConfig(format!("tensor {name} has the wrong shape")));
        }
        for (d, &s) in dst.iter_mut().zip(&src.data) {
            *d = s;
        }
    }
    Ok(())
}

pub fn to_json(model: &GnnModel, metadata: &BTreeMap<String, String>) -> Result<String> {
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        scalers: model.scalers.clone(),
        parameters: export(&model.params),
        adam: model.adam.as_ref().map(|a| AdamFile { step: a.step, m: export(&a.m), v: export(&a.v) }),
        metadata: metadata.clone(),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn from_json(text: &str) -> Result<(GnnModel, BTreeMap<String, String>)> {
    let file: CheckpointFile = serde_json::from_str(text)?;
    if file.format_version != CHECKPOINT_VERSION {
        return Err(Error::FormatVersion(file.format_version));
    }
    let mut model = GnnModel::new(file.config)?;
    if file.scalers.len() != model.scalers.len()
        || file.scalers.iter().zip(&model.scalers).any(|(a, b)| a.mean.len() != b.mean.len() || a.scale.len() != b.scale.len())
    {
        return Err(Error::InvalidConfig("feature scalers do not match the config".into()));
    }
    model.scalers = file.scalers;
    import(&mut model.params, &file.parameters)?;
    if let Some(a) = file.adam {
        let mut m = model.params.zeros_like();
        let mut v = model.params.zeros_like();
        import(&mut m, &a.m)?;
        import(&mut v, &a.v)?;
        model.adam = Some(AdamState { step: a.step, m, v });
    }
    Ok((model, file.metadata))
}

pub fn save(model: &GnnModel, metadata: &BTreeMap<String, String>, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(model, metadata)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(GnnModel, BTreeMap<String, String>)> {
    from_json(&std::fs::read_to_string(path)?)
}
