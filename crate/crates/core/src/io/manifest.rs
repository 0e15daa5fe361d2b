//! Provenance manifest: one entry per artifact with its hash and inputs.
//!
//! Entries are kept in a sorted map and nothing time-dependent is recorded,
//! so identical runs give byte-identical manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::sha256_hex;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub stage: String,
    /// Path relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    /// Names of the artifacts this one was computed from.
    pub inputs: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

impl Manifest {
    pub fn record(&mut self, name: &str, entry: ArtifactEntry) {
        self.artifacts.insert(name.to_string(), entry);
    }

    pub fn is_empty(&self) -> bool {
        self.artifacts.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Re-hash every recorded file under `dir`.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for (name, e) in &self.artifacts {
            let got = sha256_hex(&fs::read(dir.join(&e.path))?);
            if got != e.sha256 {
                return Err(Error::Format(format!("artifact '{name}' ({}) changed since it was recorded", e.path)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_manifest_round_trip_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("x.bin"), b"abc").unwrap();
        let mut m = Manifest::default();
        assert!(m.is_empty());
        m.record("x", ArtifactEntry { stage: "synth".into(), path: "x.bin".into(), sha256: sha256_hex(b"abc"), inputs: vec![] });
        let p = dir.path().join("manifest.json");
        m.write(&p).unwrap();
        assert_eq!(Manifest::read(&p).unwrap(), m);
        m.verify(dir.path()).unwrap();
        fs::write(dir.path().join("x.bin"), b"abd").unwrap();
        assert!(m.verify(dir.path()).is_err());
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
