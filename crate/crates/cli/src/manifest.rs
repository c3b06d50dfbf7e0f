//! Run manifests: the reproducibility record written next to every
//! command's outputs.
//!
//! `run.json` holds the resolved configuration, SHA-256 digests of every
//! input file, the list of files written, and command-specific
//! diagnostics. It contains no timestamps and no absolute paths, so two
//! runs with identical inputs and configuration produce byte-identical
//! manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use shiftshare_core::{Error, Result};

/// The `run.json` payload.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    /// Subcommand name.
    pub command: String,
    /// Crate version that produced the run.
    pub version: String,
    /// Fully resolved configuration (after flag and env overrides).
    pub config: serde_json::Value,
    /// Input file name → SHA-256 hex digest, sorted by name.
    pub inputs: BTreeMap<String, String>,
    /// Output file names written by the command, sorted.
    pub outputs: Vec<String>,
    /// Command-specific diagnostics (counts, shares, test statistics).
    pub diagnostics: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            diagnostics: serde_json::Value::Null,
        }
    }

    /// Records one input file under its file name (not its full path).
    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.inputs.insert(name, sha256_file(path)?);
        Ok(())
    }

    /// Records an output file name.
    pub fn add_output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    /// Serializes with sorted outputs and a trailing newline.
    pub fn to_json_string(&self) -> Result<String> {
        let mut sorted = RunManifest {
            command: self.command.clone(),
            version: self.version.clone(),
            config: self.config.clone(),
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            diagnostics: self.diagnostics.clone(),
        };
        sorted.outputs.sort();
        let mut text = serde_json::to_string_pretty(&sorted)
            .map_err(|e| Error::Invariant(format!("manifest serialization: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    /// Writes `run.json` into the output directory.
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join("run.json");
        std::fs::write(&path, self.to_json_string()?)
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// SHA-256 digest of a file, lowercase hex.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(sha256_hex(&bytes))
}

/// SHA-256 digest of a byte slice, lowercase hex.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_matches_known_vector() {
        // SHA-256("abc") is a published test vector.
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_is_deterministic_and_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("data.csv");
        std::fs::write(&input, "a,b\n1,2\n").unwrap();

        let build = || {
            let mut m = RunManifest::new("estimate", serde_json::json!({"bins": 20}));
            m.add_input(&input).unwrap();
            m.add_output("z.csv");
            m.add_output("a.csv");
            m.to_json_string().unwrap()
        };
        let first = build();
        assert_eq!(first, build());
        // Outputs are sorted regardless of insertion order.
        let parsed: serde_json::Value = serde_json::from_str(&first).unwrap();
        assert_eq!(parsed["outputs"][0], "a.csv");
        assert_eq!(parsed["inputs"]["data.csv"], sha256_hex(b"a,b\n1,2\n"));
        assert!(first.ends_with('\n'));
    }
}
