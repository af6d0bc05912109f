//! Run manifests: enough to replay any generation command.
//!
//! Every command that writes artifacts also writes
//! `<out_dir>/run-manifest.txt`:
//!
//! ```text
//! decoyforge-run v1
//! command gen-wiki
//! seed 7
//! config-hash sha256:...
//! param n_pages 50
//! ...
//! artifact wiki/page.md sha256:...
//! ```
//!
//! The `param` lines are the fully resolved parameters (flags and config
//! merged), the config hash covers exactly those lines, and artifacts
//! are listed sorted with content hashes, so two runs agree exactly when
//! their outputs agree byte for byte.

use std::path::Path;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

pub struct RunManifest {
    command: String,
    seed: Option<u64>,
    params: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self { command: command.to_string(), seed: None, params: Vec::new() }
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    /// Hash every regular file under `out_dir` (except the manifest
    /// itself) and write the manifest there.
    pub fn write(&self, out_dir: &Path) -> Result<String> {
        let mut params = self.params.clone();
        params.sort();
        let mut param_block = String::new();
        for (k, v) in &params {
            param_block.push_str(&format!("param {k} {v}\n"));
        }
        let config_hash = hex_digest(param_block.as_bytes());

        let mut artifacts = Vec::new();
        for entry in WalkDir::new(out_dir).sort_by_file_name().into_iter().flatten() {
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry
                .path()
                .strip_prefix(out_dir)
                .unwrap_or(entry.path())
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            if rel == "run-manifest.txt" {
                continue;
            }
            let bytes = std::fs::read(entry.path())
                .with_context(|| format!("hashing {}", entry.path().display()))?;
            artifacts.push((rel, hex_digest(&bytes)));
        }
        artifacts.sort();

        let mut text = String::new();
        text.push_str("decoyforge-run v1\n");
        text.push_str(&format!("command {}\n", self.command));
        if let Some(seed) = self.seed {
            text.push_str(&format!("seed {seed}\n"));
        }
        text.push_str(&format!("config-hash sha256:{config_hash}\n"));
        text.push_str(&param_block);
        for (path, hash) in &artifacts {
            text.push_str(&format!("artifact {path} sha256:{hash}\n"));
        }
        let path = out_dir.join("run-manifest.txt");
        std::fs::write(&path, &text)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(text)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_sorted_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.txt"), "bb").unwrap();
        std::fs::create_dir(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("sub/a.txt"), "aa").unwrap();
        let mut m = RunManifest::new("test");
        m.seed(7).param("x", 1);
        let text = m.write(dir.path()).unwrap();
        let artifact_lines: Vec<&str> =
            text.lines().filter(|l| l.starts_with("artifact ")).collect();
        assert_eq!(artifact_lines.len(), 2);
        assert!(artifact_lines[0].starts_with("artifact b.txt "));
        assert!(artifact_lines[1].starts_with("artifact sub/a.txt "));
        assert!(text.contains("seed 7"));
        assert!(dir.path().join("run-manifest.txt").exists());
    }
}
