use std::path::{Path, PathBuf};

use super::config::ModelConfig;
use super::net::{Model, ModelState};
use crate::blob;
use crate::error::{Error, Result};

/// Sidecar path holding the JSON `ModelConfig` next to a checkpoint.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn encode_state(state: &ModelState) -> Vec<u8> {
    let named = state.named_params();
    let entries: Vec<(String, &_)> = named.iter().map(|(n, p)| (n.clone(), &p.value)).collect();
    blob::encode_named(&entries)
}

/// Writes the parameter container to `path` and the config to its sidecar.
pub fn write_checkpoint(model: &Model, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    blob::write_file(path, &encode_state(&model.state))?;
    let json = serde_json::to_string_pretty(&model.config).map_err(|e| Error::json("model config", e))?;
    blob::write_file(&sidecar_path(path), format!("{json}\n").as_bytes())
}

pub fn read_checkpoint(path: &Path) -> Result<Model> {
    let side = sidecar_path(path);
    let config: ModelConfig = serde_json::from_slice(&blob::read_file(&side)?)
        .map_err(|e| Error::json(side.display().to_string(), e))?;
    let mut model = Model::new(config)?;
    let entries = blob::decode_named(&blob::read_file(path)?, path)?;
    let mut params = model.state.named_params().into_iter().map(|(n, _)| n).collect::<Vec<_>>();
    if entries.len() != params.len() {
        return Err(Error::invalid(
            "checkpoint",
            format!("{} tensors, model expects {}", entries.len(), params.len()),
        ));
    }
    let slots = model.state.params_mut();
    for ((slot, expected), (name, value)) in slots.into_iter().zip(params.drain(..)).zip(entries) {
        if name != expected {
            return Err(Error::invalid("checkpoint", format!("found tensor {name}, expected {expected}")));
        }
        if value.shape() != slot.value.shape() {
            return Err(Error::Shape {
                op: "checkpoint tensor",
                left: value.shape(),
                right: slot.value.shape(),
            });
        }
        slot.value = value;
    }
    Ok(model)
}
