use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use riesz_core::solver::DiagnosticRecord;
use riesz_core::{snapshot, FieldState, SpectralGrid};

use crate::config::digest_hex;

/// Provenance stamped on every table and stream.
#[derive(Debug, Clone, Serialize)]
pub struct RunHeader {
    pub experiment: String,
    pub kind: String,
    pub config_digest: String,
    pub seed: u64,
    pub grid: String,
}

impl RunHeader {
    fn comment_block(&self) -> String {
        format!(
            "# experiment={}\n# kind={}\n# config_digest={}\n# seed={}\n# grid={}\n",
            self.experiment, self.kind, self.config_digest, self.seed, self.grid
        )
    }
}

#[derive(Debug, Clone, Serialize)]
struct ManifestEntry {
    path: String,
    bytes: usize,
    sha256: String,
}

/// Writes artifacts under one output directory and removes everything it wrote if
/// dropped before [`ArtifactWriter::finish`].
pub struct ArtifactWriter {
    root: PathBuf,
    header: RunHeader,
    entries: Vec<ManifestEntry>,
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    finished: bool,
}

impl ArtifactWriter {
    pub fn create(root: &Path, header: RunHeader) -> Result<Self> {
        let mut dirs = Vec::new();
        let mut missing = Vec::new();
        let mut cur = Some(root);
        while let Some(p) = cur {
            if p.as_os_str().is_empty() || p.exists() {
                break;
            }
            missing.push(p.to_path_buf());
            cur = p.parent();
        }
        fs::create_dir_all(root).with_context(|| format!("creating output directory {}", root.display()))?;
        dirs.extend(missing);
        let probe = root.join(".write-probe");
        fs::write(&probe, b"").with_context(|| format!("output directory {} is not writable", root.display()))?;
        fs::remove_file(&probe)?;
        Ok(Self {
            root: root.to_path_buf(),
            header,
            entries: Vec::new(),
            files: Vec::new(),
            dirs,
            finished: false,
        })
    }

    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            if !parent.exists() {
                fs::create_dir_all(parent)?;
                self.dirs.push(parent.to_path_buf());
            }
        }
        self.files.push(path.clone());
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.entries.push(ManifestEntry {
            path: rel.to_string(),
            bytes: bytes.len(),
            sha256: digest_hex(bytes),
        });
        Ok(())
    }

    /// CSV table preceded by the `#` header block.
    pub fn csv(&mut self, rel: &str, columns: &str, rows: &[String]) -> Result<()> {
        let mut text = self.header.comment_block();
        text.push_str(columns);
        text.push('\n');
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        self.put(rel, text.as_bytes())
    }

    /// NDJSON stream: a header record, then one `{t, name, value}` record per line.
    pub fn ndjson(&mut self, rel: &str, records: &[DiagnosticRecord]) -> Result<()> {
        let mut text = serde_json::to_string(&json!({ "header": &self.header }))?;
        text.push('\n');
        for r in records {
            text.push_str(&serde_json::to_string(&json!({ "t": r.t, "name": r.name, "value": r.value }))?);
            text.push('\n');
        }
        self.put(rel, text.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.put(rel, text.as_bytes())
    }

    pub fn snapshot(&mut self, rel: &str, grid: &SpectralGrid, state: &FieldState) -> Result<()> {
        let mut buf = Vec::new();
        snapshot::write_state(&mut buf, grid, state)?;
        self.put(rel, &buf)
    }

    /// Writes `manifest.json` listing every artifact with its digest.
    pub fn finish(mut self) -> Result<PathBuf> {
        let manifest = json!({ "header": &self.header, "files": &self.entries });
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.root.join("manifest.json");
        self.files.push(path.clone());
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.finished = true;
        Ok(path)
    }
}

impl Drop for ArtifactWriter {
    fn drop(&mut self) {
        if self.finished {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        self.dirs.sort_by_key(|d| std::cmp::Reverse(d.components().count()));
        for d in &self.dirs {
            let _ = fs::remove_dir(d);
        }
        if !self.files.is_empty() {
            log::warn!("run aborted; removed partial output under {}", self.root.display());
        }
    }
}

/// `f64` in shortest round-trip scientific notation.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Quotes a CSV field when it contains a separator, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
