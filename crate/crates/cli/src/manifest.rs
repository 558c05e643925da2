//! `run.json`: what produced the files in an output directory.
//!
//! The manifest holds no timestamps, so rerunning a command with the same
//! flags and inputs reproduces it byte for byte along with the outputs.

use std::path::{Path, PathBuf};

use serde::Serialize;
use vislineup::fsutil::{sha256_hex, write_atomic};

use crate::error::CliResult;

pub const RUN_MANIFEST: &str = "run.json";

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub args: serde_json::Value,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let path = e.path();
        let name = e.file_name();
        let name = name.to_string_lossy();
        if name == RUN_MANIFEST || name.starts_with('.') {
            continue;
        }
        if e.file_type()?.is_dir() {
            collect(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Digests of every file under `path` (or of `path` itself), skipping
/// manifests and hidden temp files.
pub fn digest_tree(path: &Path) -> CliResult<Vec<FileDigest>> {
    let mut files = Vec::new();
    if path.is_dir() {
        collect(path, &mut files)?;
    } else {
        files.push(path.to_path_buf());
    }
    files
        .into_iter()
        .map(|f| {
            let bytes = std::fs::read(&f)?;
            Ok(FileDigest { path: f.display().to_string(), sha256: sha256_hex(&bytes) })
        })
        .collect()
}

impl RunManifest {
    pub fn new(command: &'static str, args: &impl Serialize, seed: Option<u64>) -> CliResult<Self> {
        Ok(Self {
            command,
            args: serde_json::to_value(args)?,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(mut self, path: &Path) -> CliResult<Self> {
        self.inputs.extend(digest_tree(path)?);
        Ok(self)
    }

    /// Digests everything already in `dir` and writes `dir/run.json`.
    pub fn write(mut self, dir: &Path) -> CliResult<()> {
        self.outputs = digest_tree(dir)?;
        let text = serde_json::to_string_pretty(&self)?;
        write_atomic(&dir.join(RUN_MANIFEST), format!("{text}\n").as_bytes())?;
        Ok(())
    }
}
