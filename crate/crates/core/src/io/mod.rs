//! On-disk formats: the binary field container, dataset CSV and the manifest.

pub mod container;
pub mod dataset;
pub mod manifest;

pub use container::{sidecar_path, Artifact, Container, Kind};
pub use dataset::{read_dataset, write_dataset, DataOrigin, DatasetMeta};
pub use manifest::{ArtifactEntry, Manifest};

use sha2::{Digest, Sha256};

/// Lower-case hex sha256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}
