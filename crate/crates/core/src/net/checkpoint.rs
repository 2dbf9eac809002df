//! Checkpoints: a directory holding the config as TOML plus all parameters
//! and batch-norm running statistics as a `.npz` archive of named arrays.
//!
//! Array names follow the module path convention (`stem.block0.l0.conv.weight`,
//! `bottleneck.res0.l0.norm.running_mean`, ...), so any language with an
//! npz reader can reload them.

use super::{NetError, Network, NetworkConfig};
use crate::data::InputSpec;
use crate::grasp::{DecodeConfig, GaussianEncoderConfig};
use crate::nn::Scalar;
use ndarray::{ArrayD, IxDyn};
use ndarray_npy::{NpzReader, NpzWriter, ReadableElement, WritableElement};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::path::Path;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const CONFIG_FILE: &str = "config.toml";
const PARAMS_FILE: &str = "params.npz";

/// Everything needed to rebuild the network and run inference on new
/// images exactly as during training.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub network: NetworkConfig,
    pub input: InputSpec,
    pub encoder: GaussianEncoderConfig,
    pub decode: DecodeConfig,
}

impl CheckpointMeta {
    pub fn new(
        network: NetworkConfig,
        input: InputSpec,
        encoder: GaussianEncoderConfig,
        decode: DecodeConfig,
    ) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            network,
            input,
            encoder,
            decode,
        }
    }
}

fn ck_err(path: &Path, message: impl Into<String>) -> NetError {
    NetError::Checkpoint {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Writes a checkpoint atomically (write to a temp sibling, then rename).
pub fn save_checkpoint<T>(
    dir: &Path,
    net: &Network<T>,
    meta: &CheckpointMeta,
) -> Result<(), NetError>
where
    T: Scalar + WritableElement,
{
    let parent = dir.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(parent).map_err(|e| ck_err(dir, e.to_string()))?;
    let tmp = parent.join(format!(
        ".{}.tmp-{}",
        dir.file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("checkpoint"),
        std::process::id()
    ));
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp).map_err(|e| ck_err(&tmp, e.to_string()))?;
    }
    std::fs::create_dir_all(&tmp).map_err(|e| ck_err(&tmp, e.to_string()))?;

    let toml_text = toml::to_string_pretty(meta).map_err(|e| ck_err(dir, e.to_string()))?;
    std::fs::write(tmp.join(CONFIG_FILE), toml_text)
        .map_err(|e| ck_err(&tmp, e.to_string()))?;

    let file =
        File::create(tmp.join(PARAMS_FILE)).map_err(|e| ck_err(&tmp, e.to_string()))?;
    let mut npz = NpzWriter::new(file);
    for (name, value) in net.params() {
        npz.add_array(name.as_str(), value)
            .map_err(|e| ck_err(&tmp, e.to_string()))?;
    }
    for (layer, (mean, var)) in net.stats() {
        npz.add_array(format!("{layer}.running_mean").as_str(), mean)
            .map_err(|e| ck_err(&tmp, e.to_string()))?;
        npz.add_array(format!("{layer}.running_var").as_str(), var)
            .map_err(|e| ck_err(&tmp, e.to_string()))?;
    }
    npz.finish().map_err(|e| ck_err(&tmp, e.to_string()))?;

    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| ck_err(dir, e.to_string()))?;
    }
    std::fs::rename(&tmp, dir).map_err(|e| ck_err(dir, e.to_string()))?;
    Ok(())
}

/// Loads a checkpoint directory written by [`save_checkpoint`].
pub fn load_checkpoint<T>(dir: &Path) -> Result<(Network<T>, CheckpointMeta), NetError>
where
    T: Scalar + ReadableElement,
{
    let config_path = dir.join(CONFIG_FILE);
    let toml_text =
        std::fs::read_to_string(&config_path).map_err(|e| ck_err(&config_path, e.to_string()))?;
    let meta: CheckpointMeta =
        toml::from_str(&toml_text).map_err(|e| ck_err(&config_path, e.to_string()))?;
    if meta.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(NetError::CheckpointMismatch(format!(
            "unsupported checkpoint format version {}",
            meta.format_version
        )));
    }

    let mut net = Network::<T>::new(meta.network, 0)?;
    let params_path = dir.join(PARAMS_FILE);
    let file = File::open(&params_path).map_err(|e| ck_err(&params_path, e.to_string()))?;
    let mut npz =
        NpzReader::new(file).map_err(|e| ck_err(&params_path, e.to_string()))?;
    let mut archive_names: Vec<String> = npz
        .names()
        .map_err(|e| ck_err(&params_path, e.to_string()))?;
    archive_names.sort();

    let mut expected: Vec<String> = net.params().keys().cloned().collect();
    for layer in net.stats().keys() {
        expected.push(format!("{layer}.running_mean"));
        expected.push(format!("{layer}.running_var"));
    }
    expected.sort();
    if archive_names != expected {
        let missing: Vec<&String> = expected
            .iter()
            .filter(|n| !archive_names.contains(n))
            .collect();
        let extra: Vec<&String> = archive_names
            .iter()
            .filter(|n| !expected.contains(n))
            .collect();
        return Err(NetError::CheckpointMismatch(format!(
            "archive does not match the configured architecture (missing {missing:?}, unexpected {extra:?})"
        )));
    }

    let param_names: Vec<String> = net.params().keys().cloned().collect();
    for name in param_names {
        let loaded: ArrayD<T> = npz
            .by_name(&name)
            .map_err(|e| ck_err(&params_path, format!("{name}: {e}")))?;
        let slot = net.params_mut().get_mut(&name).expect("known param");
        if loaded.shape() != slot.shape() {
            return Err(NetError::CheckpointMismatch(format!(
                "{name}: shape {:?} does not match expected {:?}",
                loaded.shape(),
                slot.shape()
            )));
        }
        *slot = loaded;
    }
    let stat_names: Vec<String> = net.stats().keys().cloned().collect();
    for layer in stat_names {
        let mean: ArrayD<T> = npz
            .by_name(&format!("{layer}.running_mean"))
            .map_err(|e| ck_err(&params_path, e.to_string()))?;
        let var: ArrayD<T> = npz
            .by_name(&format!("{layer}.running_var"))
            .map_err(|e| ck_err(&params_path, e.to_string()))?;
        let slot = net.stats_mut().get_mut(&layer).expect("known layer");
        let to1 = |a: ArrayD<T>| {
            a.into_dimensionality::<ndarray::Ix1>()
                .map_err(|e| ck_err(&params_path, e.to_string()))
        };
        *slot = (to1(mean)?, to1(var)?);
    }
    let _ = IxDyn(&[]); // keep IxDyn import alive for readability of types above
    Ok((net, meta))
}
