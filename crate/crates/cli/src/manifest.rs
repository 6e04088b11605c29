use std::fs;
use std::path::PathBuf;

use fairgraph::{Error, Result};
use serde::Serialize;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one command run, written last.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<PathBuf>,
    pub data: Vec<PathBuf>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub revision: String,
    pub duration_secs: f64,
    /// Output files, relative to `out`.
    pub files: Vec<String>,
}

pub fn revision() -> String {
    format!("fairgraph-cli {}", env!("CARGO_PKG_VERSION"))
}

impl RunManifest {
    /// Writes `manifest.json` into `out` through a temporary file and a
    /// rename. Fails if a listed output file is missing.
    pub fn write(&self) -> Result<()> {
        for f in &self.files {
            if !self.out.join(f).is_file() {
                return Err(Error::Data(format!("manifest lists missing file {f}")));
            }
        }
        let tmp = self.out.join(".manifest.json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(self)? + "\n")?;
        fs::rename(&tmp, self.out.join(MANIFEST_FILE))?;
        Ok(())
    }
}
