//! Run manifests: `manifest.txt` in the output directory, one `key=value`
//! per line, written atomically when the run finishes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::failure::Failure;

pub const FILE_NAME: &str = "manifest.txt";

pub fn sha256_file(path: &Path) -> Result<String, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes).map_err(|e| Failure::data(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| Failure::data(format!("cannot move {} into place: {e}", path.display())))?;
    Ok(())
}

#[derive(Debug)]
pub struct RunManifest {
    command: &'static str,
    out: PathBuf,
    started: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &'static str, out: &Path) -> Self {
        Self { command, out: out.to_path_buf(), started: Instant::now(), inputs: Vec::new(), outputs: Vec::new() }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Registers a produced file by its name inside the output directory.
    pub fn output(&mut self, name: impl Into<String>) {
        self.outputs.push(name.into());
    }

    pub fn render(&self, config: &[(String, String)], seeds: &[(&str, u64)]) -> Result<String, Failure> {
        let mut s = String::new();
        let _ = writeln!(s, "command={}", self.command);
        let _ = writeln!(s, "version={}", env!("CARGO_PKG_VERSION"));
        for (k, v) in config {
            let _ = writeln!(s, "config.{k}={v}");
        }
        for (k, v) in seeds {
            let _ = writeln!(s, "seed.{k}={v}");
        }
        let _ = writeln!(s, "out={}", self.out.display());
        for (i, p) in self.inputs.iter().enumerate() {
            let _ = writeln!(s, "input.{i}={}", p.display());
            let _ = writeln!(s, "input.{i}.sha256={}", sha256_file(p)?);
        }
        for name in &self.outputs {
            let _ = writeln!(s, "output.{name}.sha256={}", sha256_file(&self.out.join(name))?);
        }
        let _ = writeln!(s, "duration_ms={}", self.started.elapsed().as_millis());
        Ok(s)
    }

    pub fn write(&self, config: &[(String, String)], seeds: &[(&str, u64)]) -> Result<(), Failure> {
        let text = self.render(config, seeds)?;
        write_atomic(&self.out.join(FILE_NAME), text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksums_match_files() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(&dir.path().join("a.bin"), b"abc").unwrap();
        let mut m = RunManifest::new("test", dir.path());
        m.output("a.bin");
        m.write(&[("k".into(), "1".into())], &[("data", 7)]).unwrap();
        let text = std::fs::read_to_string(dir.path().join(FILE_NAME)).unwrap();
        // SHA-256 of "abc".
        assert!(text.contains("output.a.bin.sha256=ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"));
        assert!(text.contains("config.k=1\nseed.data=7\n"));
        assert!(!dir.path().join(".manifest.txt.tmp").exists());
    }
}
