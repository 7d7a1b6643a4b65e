//! Output directory with a content-hash manifest of every emitted file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct OutputDir {
    root: PathBuf,
    pub manifest: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|source| CliError::Output {
            path: root.display().to_string(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest: Vec::new(),
        })
    }

    pub fn with_manifest(root: &Path, manifest: Vec<ManifestEntry>) -> Self {
        Self {
            root: root.to_path_buf(),
            manifest,
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Write `name` without recording it in the manifest.
    pub fn write_untracked(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, bytes).map_err(|source| CliError::Output {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        self.write_untracked(name, bytes)?;
        let entry = ManifestEntry {
            file: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        };
        match self.manifest.iter_mut().find(|e| e.file == name) {
            Some(e) => *e = entry,
            None => self.manifest.push(entry),
        }
        self.manifest.sort_by(|a, b| a.file.cmp(&b.file));
        Ok(())
    }

    /// Write CSV produced by a library writer.
    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> survkit::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }
}
