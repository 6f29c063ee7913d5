use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::LoadedConfig;
use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn file_hash(path: &Path) -> Result<String, CliError> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub core_version: String,
    pub config_sha256: String,
    pub config_file_sha256: String,
    pub seed: u64,
    pub created_unix: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// Records the files a command read and wrote.
pub struct Recorder {
    out_dir: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl Recorder {
    pub fn new(out_dir: PathBuf) -> Result<Recorder, CliError> {
        std::fs::create_dir_all(&out_dir)?;
        Ok(Recorder {
            out_dir,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, label: &Path, resolved: &Path) -> Result<(), CliError> {
        self.inputs.insert(label.display().to_string(), file_hash(resolved)?);
        Ok(())
    }

    /// Write `bytes` to `name` inside the output directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, bytes)?;
        log::info!("wrote {}", path.display());
        self.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn finish(self, command: &str, cfg: &LoadedConfig) -> Result<PathBuf, CliError> {
        let outputs = self
            .outputs
            .iter()
            .map(|n| Ok((n.clone(), file_hash(&self.out_dir.join(n))?)))
            .collect::<Result<BTreeMap<_, _>, CliError>>()?;
        let canonical = serde_json::to_vec(&cfg.document).map_err(|e| CliError::Validation(e.to_string()))?;
        let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let m = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            core_version: vinecast_core::VERSION.to_string(),
            config_sha256: sha256_hex(&canonical),
            config_file_sha256: sha256_hex(&cfg.file_bytes),
            seed: cfg.config.seed,
            created_unix,
            inputs: self.inputs,
            outputs,
        };
        let path = self.out_dir.join(format!("manifest_{command}.json"));
        let mut text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Validation(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
