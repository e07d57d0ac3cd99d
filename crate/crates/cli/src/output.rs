use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub parameters: serde_json::Value,
    pub seeds: Vec<u64>,
    pub tool_version: &'static str,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub timestamp: String,
}

/// Files written by one run. Dropping it without [`OutputDir::commit`]
/// removes everything it wrote.
pub struct OutputDir {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<(PathBuf, FileDigest)>,
    committed: bool,
}

impl OutputDir {
    pub fn open(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
            committed: false,
        })
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push((
            path,
            FileDigest {
                path: name.to_string(),
                bytes: contents.len() as u64,
                sha256: sha256_hex(contents),
            },
        ));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.write(name, &text)
    }

    /// Writes `manifest.json` listing every earlier output and keeps the files.
    pub fn commit(
        mut self,
        subcommand: &'static str,
        parameters: &impl Serialize,
        seeds: Vec<u64>,
        inputs: Vec<FileDigest>,
    ) -> Result<()> {
        let manifest = RunManifest {
            subcommand,
            parameters: serde_json::to_value(parameters)?,
            seeds,
            tool_version: env!("CARGO_PKG_VERSION"),
            inputs,
            outputs: self.written.iter().map(|(_, d)| d.clone()).collect(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        self.write_json("manifest.json", &manifest)?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for (path, _) in &self.written {
            let _ = fs::remove_file(path);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}
