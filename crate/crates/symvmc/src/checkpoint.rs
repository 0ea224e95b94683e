//! Parameter checkpoints: a little-endian binary vector plus a JSON sidecar
//! describing the ansatz it belongs to.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use symvmc_core::ansatz::Ansatz;

use crate::config::ExperimentConfig;
use crate::error::{AppError, Result};

const MAGIC: &[u8; 8] = b"SYMVMCCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub step: usize,
    pub lattice: String,
    pub scale: f64,
    pub cutoff: u32,
    pub n_up: usize,
    pub n_down: usize,
    pub jastrow: bool,
    pub n_params: usize,
    pub energy: Option<f64>,
}

impl CheckpointMeta {
    pub fn for_config(cfg: &ExperimentConfig, step: usize, n_params: usize, energy: Option<f64>) -> Self {
        CheckpointMeta {
            step,
            lattice: cfg.system.lattice.clone(),
            scale: cfg.system.scale,
            cutoff: cfg.ansatz.cutoff,
            n_up: cfg.system.n_up,
            n_down: cfg.system.n_down,
            jastrow: cfg.ansatz.jastrow,
            n_params,
            energy: energy.filter(|e| e.is_finite()),
        }
    }
}

pub fn checkpoint_paths(dir: &Path, step: usize) -> (PathBuf, PathBuf) {
    (dir.join(format!("step_{step}.bin")), dir.join(format!("step_{step}.json")))
}

pub fn encode(params: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Vec<f64>, String> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err("not a checkpoint file".into());
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let n = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if bytes.len() != 16 + 8 * n {
        return Err(format!("truncated: {n} parameters declared, {} bytes", bytes.len()));
    }
    Ok(bytes[16..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn write(dir: &Path, meta: &CheckpointMeta, params: &[f64]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let (bin, json) = checkpoint_paths(dir, meta.step);
    fs::write(&bin, encode(params)).map_err(|e| AppError::io(&bin, e))?;
    let text = serde_json::to_string_pretty(meta)? + "\n";
    fs::write(&json, text).map_err(|e| AppError::io(&json, e))?;
    Ok(bin)
}

/// Loads `path` (the `.bin` file or its `.json` sidecar) into the ansatz the
/// config describes.
pub fn load(path: &Path, cfg: &ExperimentConfig) -> Result<Ansatz> {
    let bin = path.with_extension("bin");
    let json = path.with_extension("json");
    let bad = |reason: String| AppError::Checkpoint { path: bin.clone(), reason };
    let bytes = fs::read(&bin).map_err(|e| AppError::io(&bin, e))?;
    let params = decode(&bytes).map_err(bad)?;
    if let Ok(text) = fs::read_to_string(&json) {
        let meta: CheckpointMeta = serde_json::from_str(&text).map_err(|e| bad(format!("sidecar: {e}")))?;
        let want = CheckpointMeta::for_config(cfg, meta.step, meta.n_params, meta.energy);
        if meta.lattice != want.lattice
            || meta.cutoff != want.cutoff
            || meta.n_up != want.n_up
            || meta.n_down != want.n_down
            || meta.jastrow != want.jastrow
        {
            return Err(bad(format!(
                "checkpoint is for {} cutoff {} ({}+{} electrons, jastrow {}), config wants {} cutoff {} ({}+{}, jastrow {})",
                meta.lattice, meta.cutoff, meta.n_up, meta.n_down, meta.jastrow,
                want.lattice, want.cutoff, want.n_up, want.n_down, want.jastrow
            )));
        }
        if meta.n_params != params.len() {
            return Err(bad(format!("sidecar declares {} parameters, file has {}", meta.n_params, params.len())));
        }
    }
    let init = cfg.initial_ansatz()?;
    if init.params().len() != params.len() {
        return Err(bad(format!("{} parameters, ansatz has {}", params.len(), init.params().len())));
    }
    init.with_params(&params).map_err(|e| bad(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let p = vec![1.5, -0.0, f64::MIN_POSITIVE, 3e300];
        assert_eq!(decode(&encode(&p)).unwrap(), p);
        let mut b = encode(&p);
        b.pop();
        assert!(decode(&b).is_err());
        assert!(decode(b"garbage").is_err());
    }
}
