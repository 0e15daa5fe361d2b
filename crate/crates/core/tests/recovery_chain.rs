//! Data → strength fit → Radon domain → slices → trace, at reduced resolution.

use rayon::prelude::*;
use robinscat_core::asymptotics::diagonal_r;
use robinscat_core::field_synth::{build_quadratic_strength, AnisotropyField, Preset};
use robinscat_core::numerics::sum::rel_l2;
use robinscat_core::recovery::*;
use robinscat_core::sradon::*;
use robinscat_core::{Disk, GridSpec2D};

const EPS: f64 = 0.5;

fn field_grid() -> GridSpec2D {
    GridSpec2D::square([0.0, 0.0], 2.5, 64).unwrap()
}

fn center_grid() -> GridSpec2D {
    GridSpec2D::square([0.0, 0.0], 4.5, 64).unwrap()
}

fn slices_for(a: &AnisotropyField) -> SpectralSlices {
    let disk = Disk::unit();
    let b = build_quadratic_strength(a, EPS).unwrap();
    let pts = exterior_points(&disk, 12, 4.5, 0.05, 12);
    let n0: Vec<f64> = pts.par_iter().map(|x| diagonal_r(&b, *x).unwrap()).collect();
    let fit = fit_strength(&pts, &n0, &disk, EPS, JointFitOptions { fit_nodes: 16, ..Default::default() }).unwrap();
    let cg = center_grid();
    let w = slice_window(&cg, &disk).unwrap();
    let radii = radii_grid(w.1, cg.min_spacing() / 2.0);
    let rg = radon_forward(&fit.field, &Centers::Grid(cg), &radii).unwrap();
    extract_slices(&fourier_radon(&rg).unwrap(), w).unwrap()
}

fn preset(p: Preset) -> AnisotropyField {
    AnisotropyField::preset(field_grid(), Disk::unit(), p).unwrap()
}

#[test]
fn trace_recovery_is_linear() {
    let (a, b) = (preset(Preset::Default), preset(Preset::AxisAligned));
    let sum = AnisotropyField::from_fn(field_grid(), Disk::unit(), |p| {
        let (u, v) = (Preset::Default.eval(&Disk::unit(), p), Preset::AxisAligned.eval(&Disk::unit(), p));
        [u[0] + 0.5 * v[0], u[1] + 0.5 * v[1], u[2] + 0.5 * v[2]]
    })
    .unwrap();
    let ta = recover_trace(&slices_for(&a)).unwrap().trace;
    let tb = recover_trace(&slices_for(&b)).unwrap().trace;
    let ts = recover_trace(&slices_for(&sum)).unwrap().trace;
    let sup: Vec<f64> = ta.iter().zip(&tb).map(|(x, y)| x + 0.5 * y).collect();
    let e = rel_l2(&ts, &sup);
    assert!(e <= 0.02, "superposition defect {e}");
}

#[test]
fn trace_vanishes_off_the_support() {
    let rec = recover_trace(&slices_for(&preset(Preset::Default))).unwrap();
    let g = rec.grid;
    let peak = rec.trace.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let collar = 3.0 * g.min_spacing();
    let outside = g
        .nodes()
        .zip(&rec.trace)
        .filter(|(p, _)| Disk::unit().distance(*p) > collar)
        .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    assert!(outside <= 0.05 * peak, "{outside} vs peak {peak}");
}

#[test]
fn mean_trace_is_the_dc_bin() {
    let s = slices_for(&preset(Preset::Default));
    let rec = recover_trace(&s).unwrap();
    let g = rec.grid;
    let mean = rec.trace.iter().sum::<f64>() / g.len() as f64;
    let dc = s.trace_spectrum()[0].re / (g.extent[0] * g.extent[1]);
    assert!((mean - dc).abs() <= 0.02 * dc.abs(), "{mean} vs {dc}");
}
