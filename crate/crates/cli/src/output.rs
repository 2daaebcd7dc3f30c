//! Atomic JSON and CSV artifacts carrying tool version and config hash.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use tempfile::NamedTempFile;

pub const TOOL: &str = "fermi-sea";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where artifacts go and what they are stamped with.
pub struct Sink {
    pub dir: PathBuf,
    pub config_sha256: String,
    pub timestamp: String,
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    generated_at: &'a str,
    config_sha256: &'a str,
    units: &'static str,
    config: &'a C,
    result: &'a T,
}

impl Sink {
    pub fn new(dir: &Path, config_sha256: String) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config_sha256,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        })
    }

    pub fn json<C: Serialize, T: Serialize>(&self, name: &str, config: &C, result: &T) -> Result<PathBuf> {
        let envelope = Envelope {
            tool: TOOL,
            version: VERSION,
            generated_at: &self.timestamp,
            config_sha256: &self.config_sha256,
            units: "hartree",
            config,
            result,
        };
        let mut bytes = serde_json::to_vec_pretty(&envelope)?;
        bytes.push(b'\n');
        self.write_atomic(name, &bytes)
    }

    /// CSV with a `#` metadata line followed by the header row.
    pub fn csv<R: Serialize>(&self, name: &str, rows: &[R]) -> Result<PathBuf> {
        let mut bytes = format!(
            "# {TOOL} {VERSION} config_sha256={} generated_at={} units=hartree\n",
            self.config_sha256, self.timestamp
        )
        .into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut bytes);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        self.write_atomic(name, &bytes)
    }

    /// Write to a temporary file in the target directory, then rename.
    fn write_atomic(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut tmp = NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
