//! Backscatter datasets as CSV (`x1, x2, x3, n0, stderr`) plus JSON metadata.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{BackscatterDataset, BandDiagnostics, MeasurementConfig, Solver};
use crate::grid::Disk;

use super::sha256_hex;

#[derive(Serialize, Deserialize)]
struct Row {
    x1: f64,
    x2: f64,
    x3: f64,
    n0: f64,
    stderr: f64,
}

/// How the `n₀` column was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataOrigin {
    /// Band average of simulated scattering data (`solver` applies).
    Simulated,
    /// High-frequency limit of the true strength; `solver` is not used.
    Asymptotic,
}

/// Everything in a dataset except the per-point columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub band: [f64; 2],
    pub band_nodes: usize,
    pub p: f64,
    pub epsilon: f64,
    pub disk: Disk,
    pub origin: DataOrigin,
    pub solver: Solver,
    pub seeds: Vec<u64>,
    /// Per-point `|avg(K) − avg(3K/4)|`.
    pub tail_estimates: Vec<f64>,
    pub short_band: Vec<bool>,
    pub csv_sha256: String,
}

pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Write `<path>` (CSV) and `<path stem>.json`; returns the CSV hash.
pub fn write_dataset(d: &BackscatterDataset, origin: DataOrigin, path: &Path) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for ((x, n0), se) in d.config.points.iter().zip(&d.n0).zip(&d.stderr) {
        w.serialize(Row { x1: x[0], x2: x[1], x3: x[2], n0: *n0, stderr: *se }).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    let sha = sha256_hex(&bytes);
    fs::write(path, &bytes)?;
    let meta = DatasetMeta {
        band: [1.0, d.config.k_max],
        band_nodes: d.config.band_nodes,
        p: d.config.p,
        epsilon: d.config.epsilon,
        disk: d.config.disk,
        origin,
        solver: d.solver,
        seeds: d.seeds.clone(),
        tail_estimates: d.diagnostics.iter().map(|b| b.tail_estimate).collect(),
        short_band: d.diagnostics.iter().map(|b| b.short_band).collect(),
        csv_sha256: sha.clone(),
    };
    fs::write(meta_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(sha)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("dataset csv: {e}"))
}

/// Read a dataset written by [`write_dataset`]. Band traces are not stored,
/// so the diagnostics carry only the tail estimate and short-band flag.
pub fn read_dataset(path: &Path) -> Result<(BackscatterDataset, DatasetMeta)> {
    let bytes = fs::read(path)?;
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(meta_path(path))?)?;
    if sha256_hex(&bytes) != meta.csv_sha256 {
        return Err(Error::Format(format!("{} does not match the hash in its metadata", path.display())));
    }
    let mut points = Vec::new();
    let mut n0 = Vec::new();
    let mut stderr = Vec::new();
    for row in csv::Reader::from_reader(bytes.as_slice()).deserialize::<Row>() {
        let r = row.map_err(csv_err)?;
        points.push([r.x1, r.x2, r.x3]);
        n0.push(r.n0);
        stderr.push(r.stderr);
    }
    if meta.tail_estimates.len() != points.len() || meta.short_band.len() != points.len() {
        return Err(Error::Format("dataset metadata and csv disagree on the number of points".into()));
    }
    let diagnostics = meta
        .tail_estimates
        .iter()
        .zip(&meta.short_band)
        .map(|(t, s)| BandDiagnostics { tail_estimate: *t, short_band: *s, ..Default::default() })
        .collect();
    let config = MeasurementConfig { points, k_max: meta.band[1], band_nodes: meta.band_nodes, p: meta.p, epsilon: meta.epsilon, disk: meta.disk };
    let d = BackscatterDataset { config, n0, stderr, solver: meta.solver, seeds: meta.seeds.clone(), diagnostics };
    Ok((d, meta))
}
