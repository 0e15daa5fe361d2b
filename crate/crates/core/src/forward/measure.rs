//! Frequency-band averaged backscatter measurement.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_synth::{Estimate, FieldRealization};
use crate::forward::born::{scattered_field as sf, RadialBorn};
use crate::forward::config::MeasurementConfig;
use crate::forward::slp::SlpOperator;
use crate::forward::solver::solve_with;
use crate::numerics::quad::gauss_legendre;
use crate::numerics::sum::pairwise_sum;

/// Bands shorter than this are flagged: ergodic averaging needs many oscillations.
pub const MIN_RELIABLE_K: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Born,
    Full,
}

impl std::str::FromStr for Solver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "born" => Ok(Self::Born),
            "full" => Ok(Self::Full),
            _ => Err(Error::Config(format!("unknown solver '{s}' (born | full)"))),
        }
    }
}

impl Solver {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Born => "born",
            Self::Full => "full",
        }
    }
}

/// Composite Gauss–Legendre rule on `[1, K]` with unit-length panels.
#[derive(Clone, Debug)]
pub struct BandQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Right edge of each panel and the index one past its last node.
    pub panel_ends: Vec<(f64, usize)>,
    pub k_max: f64,
}

impl BandQuadrature {
    /// `phase_diameter` bounds the spread of travel-time differences, so the
    /// integrand oscillates in `k` on scale `π / phase_diameter`.
    pub fn new(k_max: f64, nodes_per_unit: usize, phase_diameter: f64) -> Self {
        let panels = (k_max - 1.0).ceil().max(1.0) as usize;
        let width = (k_max - 1.0) / panels as f64;
        let need = (4.0 * phase_diameter * width / PI).ceil() as usize + 1;
        let order = nodes_per_unit.max(need);
        let (x, w) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        let mut panel_ends = Vec::with_capacity(panels);
        for p in 0..panels {
            let lo = 1.0 + p as f64 * width;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(lo + 0.5 * width * (xi + 1.0));
                weights.push(0.5 * width * wi);
            }
            panel_ends.push((lo + width, nodes.len()));
        }
        Self { nodes, weights, panel_ends, k_max }
    }

    pub fn for_config(config: &MeasurementConfig) -> Self {
        Self::new(config.k_max, config.band_nodes, 2.0 * config.disk.diameter())
    }
}

/// Integrand samples and the running sub-band averages of one measurement.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BandDiagnostics {
    pub k: Vec<f64>,
    pub integrand: Vec<f64>,
    /// `(K′, average over [1, K′])` at every panel edge.
    pub running: Vec<(f64, f64)>,
    /// `|avg(K) − avg(3K/4)|`.
    pub tail_estimate: f64,
    pub short_band: bool,
}

impl BandDiagnostics {
    /// Running average at the panel edge closest to `k`.
    pub fn average_up_to(&self, k: f64) -> f64 {
        self.running
            .iter()
            .min_by(|a, b| (a.0 - k).abs().total_cmp(&(b.0 - k).abs()))
            .map(|r| r.1)
            .unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub n0: f64,
    pub diagnostics: BandDiagnostics,
}

/// Band average of `k^{2(1+ε+p)} |u(k)|²` from scattered-field samples at the quadrature nodes.
pub fn band_average(quad: &BandQuadrature, fields: &[Complex64], epsilon: f64, p: f64) -> Measurement {
    let e = 2.0 * (1.0 + epsilon + p);
    let integrand: Vec<f64> = quad.nodes.iter().zip(fields).map(|(k, u)| k.powf(e) * u.norm_sqr()).collect();
    let weighted: Vec<f64> = integrand.iter().zip(&quad.weights).map(|(f, w)| f * w).collect();
    let mut running = Vec::with_capacity(quad.panel_ends.len());
    let mut acc = 0.0;
    let mut start = 0;
    for &(edge, end) in &quad.panel_ends {
        acc += pairwise_sum(&weighted[start..end]);
        start = end;
        running.push((edge, acc / (edge - 1.0)));
    }
    let n0 = running.last().map(|r| r.1).unwrap_or(0.0);
    let k = quad.k_max;
    let mut diagnostics = BandDiagnostics {
        k: quad.nodes.clone(),
        integrand,
        running,
        tail_estimate: 0.0,
        short_band: k < MIN_RELIABLE_K,
    };
    diagnostics.tail_estimate = (n0 - diagnostics.average_up_to(1.0 + 0.75 * (k - 1.0))).abs();
    Measurement { n0, diagnostics }
}

/// Backscattered field `u_s(x; x, k)` at every band node.
pub fn band_fields(lambda: &FieldRealization, x: [f64; 3], quad: &BandQuadrature, p: f64, solver: Solver) -> Result<Vec<Complex64>> {
    match solver {
        Solver::Born => {
            let rb = RadialBorn::new(lambda, x, quad.k_max)?;
            Ok(quad.nodes.iter().map(|k| rb.u1(*k, p)).collect())
        }
        Solver::Full => quad
            .nodes
            .iter()
            .map(|&k| {
                let op = SlpOperator::new(&lambda.grid, &lambda.disk, k)?;
                let out = solve_with(&op, lambda, x, k, p)?;
                sf(&out.density, x)
            })
            .collect(),
    }
}

/// `n₀(x)` for one realization.
pub fn measure(lambda: &FieldRealization, x: [f64; 3], config: &MeasurementConfig, solver: Solver) -> Result<Measurement> {
    config.validate()?;
    if !config.contains_point(x) {
        return Err(Error::Config(format!("point {x:?} is not in the measurement configuration")));
    }
    if config.k_max < MIN_RELIABLE_K {
        log::warn!("band [1, {}] is shorter than [1, {MIN_RELIABLE_K}]; ergodic averaging is unreliable", config.k_max);
    }
    let quad = BandQuadrature::for_config(config);
    let fields = band_fields(lambda, x, &quad, config.p, solver)?;
    Ok(band_average(&quad, &fields, config.epsilon, config.p))
}

/// Band-averaged backscatter values at all configured points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackscatterDataset {
    pub config: MeasurementConfig,
    pub n0: Vec<f64>,
    /// Monte Carlo standard error for ensemble datasets, band-tail estimate otherwise.
    pub stderr: Vec<f64>,
    pub solver: Solver,
    pub seeds: Vec<u64>,
    pub diagnostics: Vec<BandDiagnostics>,
}

impl BackscatterDataset {
    /// Pointwise ensemble mean of single-realization datasets.
    pub fn ensemble_mean(sets: &[BackscatterDataset]) -> Result<Self> {
        let first = sets.first().ok_or_else(|| Error::Config("empty dataset list".into()))?;
        if sets.iter().any(|s| s.config != first.config || s.solver != first.solver) {
            return Err(Error::Inconsistent("datasets use different configurations".into()));
        }
        let mut n0 = Vec::new();
        let mut stderr = Vec::new();
        for i in 0..first.n0.len() {
            let v: Vec<f64> = sets.iter().map(|s| s.n0[i]).collect();
            let e = Estimate::from_samples(&v);
            n0.push(e.value);
            stderr.push(e.std_error);
        }
        Ok(Self {
            config: first.config.clone(),
            n0,
            stderr,
            solver: first.solver,
            seeds: sets.iter().flat_map(|s| s.seeds.iter().copied()).collect(),
            diagnostics: Vec::new(),
        })
    }
}

/// Measure every configured point on one realization.
pub fn measure_dataset(lambda: &FieldRealization, config: &MeasurementConfig, solver: Solver) -> Result<BackscatterDataset> {
    config.validate()?;
    let results: Vec<Measurement> = config
        .points
        .par_iter()
        .map(|x| measure(lambda, *x, config, solver))
        .collect::<Result<_>>()?;
    Ok(BackscatterDataset {
        config: config.clone(),
        n0: results.iter().map(|m| m.n0).collect(),
        stderr: results.iter().map(|m| m.diagnostics.tail_estimate).collect(),
        solver,
        seeds: vec![lambda.seed],
        diagnostics: results.into_iter().map(|m| m.diagnostics).collect(),
    })
}
