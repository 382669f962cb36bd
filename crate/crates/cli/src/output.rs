//! Output directory with a manifest of every file written.
//!
//! `manifest.json` keeps one entry per subcommand, so `recon` followed by
//! `heatmap` in the same directory lists both runs; rerunning a command
//! replaces its own entry.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sure_amp::io::{encode_complex, encode_real};
use sure_amp::{ComplexGrid, RealGrid};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub config_hash: String,
    pub config: RunConfig,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub runs: BTreeMap<String, RunEntry>,
}

pub struct OutDir {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.path(name), bytes)?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: bytes.len(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn put_real(&mut self, name: &str, g: &RealGrid) -> Result<(), CliError> {
        self.put(name, &encode_real(g))
    }

    pub fn put_complex(&mut self, name: &str, g: &ComplexGrid) -> Result<(), CliError> {
        self.put(name, &encode_complex(g))
    }

    pub fn put_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    /// Records this run in the manifest.
    pub fn finish(self, command: &str, cfg: &RunConfig) -> Result<(), CliError> {
        let path = self.path(MANIFEST);
        let mut manifest: Manifest = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
            Err(_) => Manifest::default(),
        };
        manifest.runs.insert(
            command.to_string(),
            RunEntry { config_hash: cfg.hash(), config: cfg.clone(), files: self.files },
        );
        let mut text = serde_json::to_string_pretty(&manifest).expect("serializable");
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}
