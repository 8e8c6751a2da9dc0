//! JSON checkpoint container: configuration plus every named tensor.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::Params;
use super::tensor::Tensor;
use super::ModelState;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    #[serde(flatten)]
    pub tensor: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_state(state: &ModelState) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: state.config.clone(),
            tensors: state
                .params
                .named()
                .into_iter()
                .map(|(name, t)| NamedTensor {
                    name,
                    tensor: t.clone(),
                })
                .collect(),
        }
    }

    pub fn into_state(self) -> Result<ModelState> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        self.config.validate()?;
        let mut params = Params::zeros(&self.config);
        let slots = params.named_mut();
        if slots.len() != self.tensors.len() {
            return Err(Error::Shape(format!(
                "checkpoint holds {} tensors, configuration needs {}",
                self.tensors.len(),
                slots.len()
            )));
        }
        for ((name, slot), stored) in slots.into_iter().zip(self.tensors) {
            if stored.name != name {
                return Err(Error::Shape(format!(
                    "expected tensor {name}, found {}",
                    stored.name
                )));
            }
            let t = stored.tensor;
            if t.shape() != slot.shape() || t.data.len() != t.rows * t.cols {
                return Err(Error::Shape(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            if !t.all_finite() {
                return Err(Error::NonFinite("checkpoint tensor"));
            }
            *slot = t;
        }
        Ok(ModelState {
            config: self.config,
            params,
        })
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn save_checkpoint(state: &ModelState, path: &Path) -> Result<()> {
    let json = serde_json::to_string(&Checkpoint::from_state(state))?;
    write_atomic(path, json.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelState> {
    let text = fs::read_to_string(path)?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    ckpt.into_state()
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
