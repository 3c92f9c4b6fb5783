//! Run provenance: what command ran, with what inputs, producing what.
//!
//! Every subcommand writes a manifest when it finishes. The manifest is
//! the one output allowed to differ between reruns (it records wall
//! time); all other result files must be byte-identical for equal inputs.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    /// Subcommand name plus its arguments, space-joined.
    pub command: String,
    /// Snapshot of the effective configuration, if the command has one.
    pub config: serde_json::Value,
    /// Seed in effect, if the command draws randomness.
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

/// Writes bytes to `path` through a sibling temp file and a rename, so a
/// crash never leaves a half-written result behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    fs::write(tmp, bytes)?;
    fs::rename(tmp, path)
}

/// Serializes the manifest as pretty JSON and writes it atomically.
pub fn write_manifest(path: &Path, manifest: &RunManifest) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_manifest(path: &Path) -> io::Result<RunManifest> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunManifest {
        RunManifest {
            command: "solve --scene s --out p.json".into(),
            config: serde_json::json!({"learning_rate": 0.01, "iterations": 100}),
            seed: Some(7),
            inputs: vec!["s".into()],
            outputs: vec!["p.json".into()],
            wall_time_s: 1.25,
        }
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let manifest = sample();
        write_manifest(&path, &manifest).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), manifest);
        // No temp file left behind.
        assert!(!path.with_extension("json.tmp").exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn atomic_write_replaces_existing_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"second");
    }
}
