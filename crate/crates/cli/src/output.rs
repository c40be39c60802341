//! Output directory handling and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use syntrophic::export::to_json;
use syntrophic::{ChemostatConfig, ConfigDocument};
use tempfile::NamedTempFile;

use crate::commands::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let fail = |e: std::io::Error| CliError::io(path, e);
    let mut tmp = NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// Collects the files written by one run.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Renders with `f` into memory, then writes atomically.
    pub fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| CliError::io(&self.dir.join(name), e))?;
        self.write(name, &buf)
    }

    pub fn written(&self) -> Vec<String> {
        self.written
            .iter()
            .map(|p| p.display().to_string())
            .collect()
    }

    /// Writes the manifest listing every file produced so far.
    pub fn finish(mut self, manifest: ManifestInput<'_>) -> Result<(), CliError> {
        let record = RunManifest {
            subcommand: manifest.subcommand,
            config_path: manifest.config_path.display().to_string(),
            config: manifest.document,
            resolved: manifest.resolved,
            dilution: manifest.dilution,
            seed: manifest.seed,
            outputs: self.written(),
            version: env!("CARGO_PKG_VERSION"),
            duration_seconds: manifest.started.elapsed().as_secs_f64(),
        };
        let json = to_json(&record).map_err(|e| CliError::internal(e.to_string()))?;
        self.write(MANIFEST, json.as_bytes())?;
        Ok(())
    }
}

pub struct ManifestInput<'a> {
    pub subcommand: &'static str,
    pub config_path: &'a Path,
    pub document: &'a ConfigDocument,
    pub resolved: ChemostatConfig,
    pub dilution: f64,
    pub seed: u64,
    pub started: Instant,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    subcommand: &'static str,
    config_path: String,
    config: &'a ConfigDocument,
    /// Scaled operating conditions actually used.
    resolved: ChemostatConfig,
    #[serde(rename = "D")]
    dilution: f64,
    seed: u64,
    outputs: Vec<String>,
    version: &'static str,
    duration_seconds: f64,
}
