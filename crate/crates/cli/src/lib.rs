//! Configuration-driven pipeline runner: synthesize a field, simulate or
//! tabulate backscatter data, reduce it to the Radon domain and recover the
//! anisotropy, with hashed artifacts and a provenance manifest.

pub mod config;
pub mod pipeline;
pub mod plots;

pub use config::{Assignments, DataMode, PipelineConfig, Stage};
pub use pipeline::{artifact_path, names, run_pipeline, MANIFEST};
