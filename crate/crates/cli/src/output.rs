use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Provenance written at the top of every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub subcommand: String,
    pub config: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub timestamp: u64,
    /// Remaining parameters as `key=value` strings.
    pub parameters: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, timestamp: u64) -> Self {
        Self {
            version: format!("rals {}", env!("CARGO_PKG_VERSION")),
            subcommand: subcommand.into(),
            config: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            timestamp,
            parameters: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        self.parameters.push(format!("{key}={value}"));
        self
    }

    /// `#`-prefixed lines for CSV and SVG-comment headers.
    pub fn comment_lines(&self) -> String {
        let paths = |v: &[PathBuf]| v.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(" ");
        let mut out = format!("# {}\n# subcommand: {}\n", self.version, self.subcommand);
        if let Some(c) = &self.config {
            out += &format!("# config: {}\n", c.display());
        }
        if !self.inputs.is_empty() {
            out += &format!("# inputs: {}\n", paths(&self.inputs));
        }
        out += &format!("# outputs: {}\n", paths(&self.outputs));
        if let Some(s) = self.seed {
            out += &format!("# seed: {s}\n");
        }
        out += &format!("# timestamp: {}\n", self.timestamp);
        if !self.parameters.is_empty() {
            out += &format!("# parameters: {}\n", self.parameters.join(" "));
        }
        out
    }
}

/// Writes `contents` next to `path` under a temporary name and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().with_context(|| format!("{} is not a file path", path.display()))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(contents)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))?;
    Ok(())
}

/// CSV body prefixed by the manifest, to a file or stdout.
pub fn emit_csv(manifest: &RunManifest, body: &str, out: Option<&Path>) -> Result<()> {
    let text = format!("{}{body}", manifest.comment_lines());
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}
