//! Output directory layout: one CSV per command, certificates, the echoed
//! config and the run metadata.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use scatbound_core::dual::DualCertificate;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::SweepConfig;

pub const CERT_DIR: &str = "certs";
pub const RUN_FILE: &str = "run.json";

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root.join(CERT_DIR))
            .with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes rows with a header taken from the row type, in the given order.
    pub fn write_csv<R: Serialize>(&self, name: &str, rows: &[R]) -> anyhow::Result<PathBuf> {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        let path = self.root.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Stores a certificate and returns its path relative to the output root.
    pub fn write_certificate(&self, stem: &str, cert: &DualCertificate) -> anyhow::Result<String> {
        let rel = format!("{CERT_DIR}/{stem}.json");
        let text = serde_json::to_string(cert)?;
        fs::write(self.root.join(&rel), text).with_context(|| format!("writing {rel}"))?;
        Ok(rel)
    }

    pub fn echo_config(&self, command: &str, config: &SweepConfig) -> anyhow::Result<PathBuf> {
        self.write_json(&format!("{command}.config.json"), config)
    }

    /// Merges this command's metadata into `run.json`, keyed by command name.
    pub fn record_run(&self, command: &str, meta: Value) -> anyhow::Result<()> {
        let path = self.root.join(RUN_FILE);
        let mut all = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_else(|_| json!({})),
            Err(_) => json!({}),
        };
        all[command] = meta;
        self.write_json(RUN_FILE, &all)?;
        Ok(())
    }
}

/// Sorted certificate files under `dir/certs`, or `dir` itself if it is a file.
pub fn certificate_files(path: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let dir = if path.join(CERT_DIR).is_dir() {
        path.join(CERT_DIR)
    } else {
        path.to_path_buf()
    };
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}
