use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// One directory per invocation, named `<timestamp>-seed<N>-<command>`.
pub struct RunDir {
    pub path: PathBuf,
    manifest: Value,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunDir {
    /// Creates the directory and writes the manifest with the effective
    /// configuration before any work starts.
    pub fn create<C: Serialize>(
        root: &Path,
        command: &str,
        seed: u64,
        config: &C,
        inputs: &[&Path],
    ) -> Result<Self> {
        let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S%.3f");
        let mut path = root.join(format!("{stamp}-seed{seed}-{command}"));
        let mut n = 1;
        while path.exists() {
            path = root.join(format!("{stamp}-seed{seed}-{command}-{n}"));
            n += 1;
        }
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut hashes = serde_json::Map::new();
        for p in inputs {
            hashes.insert(p.display().to_string(), json!(sha256_file(p)?));
        }
        let manifest = json!({
            "command": command,
            "argv": std::env::args().collect::<Vec<_>>(),
            "seed": seed,
            "versions": {
                "salsa": env!("CARGO_PKG_VERSION"),
                "bundle_format": salsa_core::io::FORMAT_VERSION,
            },
            "config": config,
            "inputs": hashes,
            "outputs": {},
            "status": "running",
        });
        let run = RunDir { path, manifest };
        run.flush()?;
        Ok(run)
    }

    fn flush(&self) -> Result<()> {
        let p = self.path.join("manifest.json");
        fs::write(&p, serde_json::to_string_pretty(&self.manifest)? + "\n")
            .with_context(|| format!("writing {}", p.display()))
    }

    /// Writes `contents` to `name` inside the run directory and records
    /// its hash.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let p = self.path.join(name);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        self.record(&p)?;
        Ok(p)
    }

    pub fn record(&mut self, p: &Path) -> Result<()> {
        let name = p
            .strip_prefix(&self.path)
            .unwrap_or(p)
            .display()
            .to_string();
        self.manifest["outputs"][name] = json!(sha256_file(p)?);
        self.flush()
    }

    pub fn note(&mut self, key: &str, value: Value) -> Result<()> {
        self.manifest[key] = value;
        self.flush()
    }

    pub fn finish(mut self, status: &str) -> Result<PathBuf> {
        self.manifest["status"] = json!(status);
        self.flush()?;
        Ok(self.path)
    }
}

/// Stable location of the most recent artefact of a kind, so later commands
/// can find it without an explicit path.
pub fn latest_path(root: &Path, kind: &str, env: &str, hd: usize) -> PathBuf {
    root.join("latest").join(format!("{kind}_{env}_hd{hd}.json"))
}

pub fn publish_latest(root: &Path, kind: &str, env: &str, hd: usize, contents: &str) -> Result<PathBuf> {
    let p = latest_path(root, kind, env, hd);
    fs::create_dir_all(p.parent().expect("has parent"))?;
    fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
    Ok(p)
}
