//! CSV traces of the diagnostics, one file per figure-like quantity.

use std::path::Path;

use anyhow::Result;
use robinscat_core::field_synth::AnisotropyField;
use robinscat_core::forward::BandDiagnostics;
use robinscat_core::recovery::RecoveredAnisotropy;
use robinscat_core::sradon::SpectralSlices;

fn write<R: serde::Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(serde::Serialize)]
struct NormRow {
    k: f64,
    norm: f64,
}

pub fn norm_decay(path: &Path, ks: &[f64], norms: &[f64]) -> Result<()> {
    write(path, ks.iter().zip(norms).map(|(k, n)| NormRow { k: *k, norm: *n }))
}

#[derive(serde::Serialize)]
struct BornRow {
    term: usize,
    term_norm: f64,
    residual: Option<f64>,
}

pub fn born_series(path: &Path, term_norms: &[f64], residuals: &[f64]) -> Result<()> {
    write(path, term_norms.iter().enumerate().map(|(i, t)| BornRow { term: i + 1, term_norm: *t, residual: i.checked_sub(1).and_then(|j| residuals.get(j)).copied() }))
}

#[derive(serde::Serialize)]
struct BandRow {
    point: usize,
    k_upper: f64,
    running_average: f64,
}

/// Running band average `(K′, avg over [1, K′])` for every point.
pub fn band_average(path: &Path, diags: &[BandDiagnostics]) -> Result<()> {
    write(
        path,
        diags.iter().enumerate().flat_map(|(i, d)| d.running.iter().map(move |(k, a)| BandRow { point: i, k_upper: *k, running_average: *a })),
    )
}

#[derive(serde::Serialize)]
struct SliceRow {
    xi1: f64,
    xi2: f64,
    par_abs: f64,
    perp_abs: f64,
    valid: bool,
}

pub fn slice_magnitudes(path: &Path, s: &SpectralSlices) -> Result<()> {
    write(
        path,
        (0..s.grid.len()).map(|i| {
            let xi = s.grid.xi(i);
            SliceRow { xi1: xi[0], xi2: xi[1], par_abs: s.slice_par[i].norm(), perp_abs: s.slice_perp[i].norm(), valid: s.valid[i] }
        }),
    )
}

#[derive(serde::Serialize)]
struct ErrorRow {
    x1: f64,
    x2: f64,
    trace_true: f64,
    trace_recovered: f64,
    trace_error: f64,
}

pub fn error_map(path: &Path, rec: &RecoveredAnisotropy, truth: &AnisotropyField) -> Result<()> {
    let t = truth.trace();
    write(
        path,
        rec.grid.nodes().enumerate().map(|(i, p)| ErrorRow { x1: p[0], x2: p[1], trace_true: t[i], trace_recovered: rec.trace[i], trace_error: rec.trace[i] - t[i] }),
    )
}
