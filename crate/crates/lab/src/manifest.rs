use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::format::hex_digest;

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Provenance record written next to every output as `<out>.manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub seed: Option<u64>,
    pub toolkit_version: String,
    pub instance_hash: Option<String>,
    pub wall_time_seconds: f64,
    pub outputs: Vec<OutputEntry>,
}

/// Collects output files for one command and writes the manifest.
pub struct Recorder {
    started: Instant,
    command_line: Vec<String>,
    pub seed: Option<u64>,
    pub instance_hash: Option<String>,
    outputs: Vec<OutputEntry>,
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| LabError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

impl Recorder {
    pub fn new(command_line: Vec<String>) -> Self {
        Recorder {
            started: Instant::now(),
            command_line,
            seed: None,
            instance_hash: None,
            outputs: Vec::new(),
        }
    }

    /// Writes `bytes` to `path` and records its hash.
    pub fn emit(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_file(path, bytes)?;
        self.outputs.push(OutputEntry {
            path: path.display().to_string(),
            sha256: hex_digest(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn finish(self, primary: &Path) -> Result<RunManifest> {
        let manifest = RunManifest {
            command_line: self.command_line,
            seed: self.seed,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            instance_hash: self.instance_hash,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            outputs: self.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("serializable");
        text.push('\n');
        write_file(&manifest_path(primary), text.as_bytes())?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_hashed_outputs() {
        let dir = std::env::temp_dir().join(format!("rmdp-manifest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let out = dir.join("a.csv");
        let mut rec = Recorder::new(vec!["rmdp-lab".into()]);
        rec.emit(&out, b"x\n1\n").unwrap();
        let m = rec.finish(&out).unwrap();
        assert_eq!(m.outputs.len(), 1);
        assert_eq!(m.outputs[0].sha256, hex_digest(b"x\n1\n"));
        let text = std::fs::read_to_string(manifest_path(&out)).unwrap();
        assert!(text.contains(&m.outputs[0].sha256));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
