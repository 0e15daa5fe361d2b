//! Pipeline configuration: flat `key = value` text.
//!
//! One assignment per line, `#` starts a comment, list-valued keys are
//! repeated (`stage = synth`, `stage = measure`, ...). Scalar keys may appear
//! once. Command-line overrides use the same syntax and replace every earlier
//! occurrence of their key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use robinscat_core::field_synth::Preset;
use robinscat_core::forward::Solver;
use robinscat_core::io::sha256_hex;
use robinscat_core::recovery::Component;
use robinscat_core::{Disk, GridSpec2D};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Synth,
    Forward,
    Measure,
    Reduce,
    Radon,
    Recover,
    Verify,
}

impl Stage {
    pub const ALL: [Stage; 7] = [Stage::Synth, Stage::Forward, Stage::Measure, Stage::Reduce, Stage::Radon, Stage::Recover, Stage::Verify];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Forward => "forward",
            Stage::Measure => "measure",
            Stage::Reduce => "reduce",
            Stage::Radon => "radon",
            Stage::Recover => "recover",
            Stage::Verify => "verify",
        }
    }
}

impl FromStr for Stage {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| anyhow!("unknown stage '{s}'"))
    }
}

/// Where the backscatter data of the measure stage comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataMode {
    /// Noiseless `n₀` from the high-frequency limit of the true strength.
    Asymptotic,
    /// Band average of one simulated realization.
    Simulated(Solver),
}

impl FromStr for DataMode {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asymptotic" => Ok(DataMode::Asymptotic),
            "born" => Ok(DataMode::Simulated(Solver::Born)),
            "full" => Ok(DataMode::Simulated(Solver::Full)),
            _ => bail!("unknown data mode '{s}' (expected asymptotic, born or full)"),
        }
    }
}

impl DataMode {
    fn name(self) -> &'static str {
        match self {
            DataMode::Asymptotic => "asymptotic",
            DataMode::Simulated(Solver::Born) => "born",
            DataMode::Simulated(Solver::Full) => "full",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub stages: Vec<Stage>,
    pub output: PathBuf,
    /// Worker threads; 0 uses all cores. Does not affect any result.
    pub threads: usize,
    pub emit_plots: bool,

    pub seed: u64,
    pub epsilon: f64,
    pub p: f64,
    pub disk: Disk,
    pub field_nodes: usize,
    pub field_side: f64,
    pub preset: Preset,
    /// Anisotropy container that replaces the preset.
    pub anisotropy_file: Option<PathBuf>,

    pub forward_k: f64,
    pub norm_k: Vec<f64>,
    pub born_terms: usize,

    pub data: DataMode,
    pub k_max: f64,
    pub band_nodes: usize,
    /// Explicit measurement points; the exterior acquisition grid is used when empty.
    pub points: Vec<[f64; 3]>,
    pub acq_centers: usize,
    pub acq_extent: f64,
    pub acq_min_gap: f64,
    pub acq_heights: usize,

    pub fit_nodes: usize,
    pub fit_quad_sub: usize,
    pub fit_reg: f64,

    pub radon_nodes: usize,
    pub radon_side: f64,

    pub known: Option<Component>,
    /// Anisotropy container supplying the known component; the synthesized truth otherwise.
    pub known_file: Option<PathBuf>,
    pub slice_noise: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stages: Stage::ALL.to_vec(),
            output: PathBuf::from("out"),
            threads: 0,
            emit_plots: false,
            seed: 1,
            epsilon: 0.5,
            p: 1.5,
            disk: Disk::unit(),
            field_nodes: 128,
            field_side: 2.5,
            preset: Preset::Default,
            anisotropy_file: None,
            forward_k: 40.0,
            norm_k: vec![4.0, 8.0, 16.0, 32.0, 64.0],
            born_terms: 8,
            data: DataMode::Asymptotic,
            k_max: 200.0,
            band_nodes: 8,
            points: Vec::new(),
            acq_centers: 24,
            acq_extent: 4.5,
            acq_min_gap: 0.05,
            acq_heights: 24,
            fit_nodes: 32,
            fit_quad_sub: 4,
            fit_reg: 1e-8,
            radon_nodes: 128,
            radon_side: 4.5,
            known: Some(Component::A3),
            known_file: None,
            slice_noise: 0.05,
        }
    }
}

/// Documented schema: key and one-line description, in canonical order.
pub const SCHEMA: &[(&str, &str)] = &[
    ("stage", "stage to run, repeated; empty value for none (synth forward measure reduce radon recover verify)"),
    ("output", "output directory"),
    ("threads", "worker threads, 0 = all cores; never changes results"),
    ("emit_plots", "write CSV traces of the diagnostics (true/false)"),
    ("seed", "seed of the field realization"),
    ("epsilon", "field order ε > 0"),
    ("p", "frequency scaling exponent, p > ε + 1/2"),
    ("disk_center", "support disk center x,y"),
    ("disk_radius", "support disk radius"),
    ("field_nodes", "field grid nodes per side (power of two)"),
    ("field_side", "field grid side length"),
    ("preset", "anisotropy phantom (zero identity isotropic-bump axis-aligned default gaussian-potential)"),
    ("anisotropy_file", "anisotropy container replacing the preset"),
    ("forward_k", "wavenumber of the Born-series check"),
    ("norm_k", "wavenumber for the operator norm decay, repeated"),
    ("born_terms", "Neumann terms in the Born-series check"),
    ("data", "backscatter data: asymptotic, born or full"),
    ("k_max", "upper band edge K of the band average [1, K]"),
    ("band_nodes", "band quadrature nodes per unit k"),
    ("point", "measurement point x1,x2,x3, repeated; empty list uses the acquisition grid"),
    ("acq_centers", "acquisition centers per side"),
    ("acq_extent", "acquisition grid side length"),
    ("acq_min_gap", "smallest center distance to the disk, in radii"),
    ("acq_heights", "log-spaced heights per center"),
    ("fit_nodes", "strength fit grid nodes per side (power of two)"),
    ("fit_quad_sub", "quadrature points per fit cell side"),
    ("fit_reg", "smoothness weight of the strength fit"),
    ("radon_nodes", "Radon center grid nodes per side (power of two)"),
    ("radon_side", "Radon center grid side length"),
    ("known", "known component for full recovery: none, a1, a2 or a3"),
    ("known_file", "anisotropy container supplying the known component"),
    ("slice_noise", "relative slice noise level for the consistency check"),
];

const LIST_KEYS: &[&str] = &["stage", "norm_k", "point"];
/// Keys that never change an artifact and are left out of the config hash.
const RUNTIME_KEYS: &[&str] = &["output", "threads", "emit_plots"];

/// Ordered `key → values` view of config text.
#[derive(Clone, Debug, Default)]
pub struct Assignments(Vec<(String, String)>);

impl Assignments {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            out.push(split_assignment(line).with_context(|| format!("line {}", n + 1))?);
        }
        Ok(Self(out))
    }

    /// Apply `key=value` overrides: each key drops its earlier assignments.
    pub fn override_with(&mut self, sets: &[String]) -> Result<()> {
        let parsed: Vec<(String, String)> = sets.iter().map(|s| split_assignment(s)).collect::<Result<_>>()?;
        for (k, _) in &parsed {
            self.0.retain(|(key, _)| key != k);
        }
        self.0.extend(parsed);
        Ok(())
    }
}

fn split_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| anyhow!("expected `key = value`, got '{s}'"))?;
    let k = k.trim();
    if !SCHEMA.iter().any(|(name, _)| *name == k) {
        bail!("unknown key '{k}'");
    }
    Ok((k.to_string(), v.trim().to_string()))
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| anyhow!("{key} = '{v}': {e}"))
}

fn parse_tuple<const N: usize>(key: &str, v: &str) -> Result<[f64; N]> {
    let parts: Vec<f64> = v.split(',').map(|p| parse::<f64>(key, p.trim())).collect::<Result<_>>()?;
    parts.try_into().map_err(|_| anyhow!("{key} = '{v}': expected {N} comma-separated numbers"))
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl PipelineConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_assignments(&Assignments::parse(text)?)
    }

    pub fn from_assignments(a: &Assignments) -> Result<Self> {
        let mut grouped: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (k, v) in &a.0 {
            grouped.entry(k.as_str()).or_default().push(v.as_str());
        }
        let mut c = Self::default();
        for (key, vals) in grouped {
            if LIST_KEYS.contains(&key) {
                let items: Vec<&str> = vals.into_iter().filter(|v| !v.is_empty()).collect();
                match key {
                    "stage" => c.stages = items.iter().map(|v| v.parse()).collect::<Result<_>>()?,
                    "norm_k" => c.norm_k = items.iter().map(|v| parse(key, v)).collect::<Result<_>>()?,
                    "point" => c.points = items.iter().map(|v| parse_tuple::<3>(key, v)).collect::<Result<_>>()?,
                    _ => unreachable!(),
                }
                continue;
            }
            if vals.len() > 1 {
                bail!("scalar key '{key}' is assigned {} times", vals.len());
            }
            let v = vals[0];
            match key {
                "output" => c.output = PathBuf::from(v),
                "threads" => c.threads = parse(key, v)?,
                "emit_plots" => c.emit_plots = parse(key, v)?,
                "seed" => c.seed = parse(key, v)?,
                "epsilon" => c.epsilon = parse(key, v)?,
                "p" => c.p = parse(key, v)?,
                "disk_center" => c.disk.center = parse_tuple::<2>(key, v)?,
                "disk_radius" => c.disk.radius = parse(key, v)?,
                "field_nodes" => c.field_nodes = parse(key, v)?,
                "field_side" => c.field_side = parse(key, v)?,
                "preset" => c.preset = parse(key, v)?,
                "anisotropy_file" => c.anisotropy_file = opt_path(v),
                "forward_k" => c.forward_k = parse(key, v)?,
                "born_terms" => c.born_terms = parse(key, v)?,
                "data" => c.data = v.parse()?,
                "k_max" => c.k_max = parse(key, v)?,
                "band_nodes" => c.band_nodes = parse(key, v)?,
                "acq_centers" => c.acq_centers = parse(key, v)?,
                "acq_extent" => c.acq_extent = parse(key, v)?,
                "acq_min_gap" => c.acq_min_gap = parse(key, v)?,
                "acq_heights" => c.acq_heights = parse(key, v)?,
                "fit_nodes" => c.fit_nodes = parse(key, v)?,
                "fit_quad_sub" => c.fit_quad_sub = parse(key, v)?,
                "fit_reg" => c.fit_reg = parse(key, v)?,
                "radon_nodes" => c.radon_nodes = parse(key, v)?,
                "radon_side" => c.radon_side = parse(key, v)?,
                "known" => c.known = if v == "none" { None } else { Some(parse(key, v)?) },
                "known_file" => c.known_file = opt_path(v),
                "slice_noise" => c.slice_noise = parse(key, v)?,
                _ => unreachable!("schema key without a parser: {key}"),
            }
        }
        Ok(c)
    }

    /// Canonical text: every key in schema order, lists as repeated keys.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (key, _) in SCHEMA {
            self.write_key(&mut s, key);
        }
        s
    }

    fn write_key(&self, s: &mut String, key: &str) {
        let mut line = |v: String| {
            let _ = writeln!(s, "{key} = {v}");
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        match key {
            "stage" if self.stages.is_empty() => line(String::new()),
            "stage" => self.stages.iter().for_each(|st| line(st.name().into())),
            "output" => line(self.output.display().to_string()),
            "threads" => line(self.threads.to_string()),
            "emit_plots" => line(self.emit_plots.to_string()),
            "seed" => line(self.seed.to_string()),
            "epsilon" => line(self.epsilon.to_string()),
            "p" => line(self.p.to_string()),
            "disk_center" => line(format!("{},{}", self.disk.center[0], self.disk.center[1])),
            "disk_radius" => line(self.disk.radius.to_string()),
            "field_nodes" => line(self.field_nodes.to_string()),
            "field_side" => line(self.field_side.to_string()),
            "preset" => line(self.preset.name().into()),
            "anisotropy_file" => line(path(&self.anisotropy_file)),
            "forward_k" => line(self.forward_k.to_string()),
            "norm_k" if self.norm_k.is_empty() => line(String::new()),
            "norm_k" => self.norm_k.iter().for_each(|k| line(k.to_string())),
            "born_terms" => line(self.born_terms.to_string()),
            "data" => line(self.data.name().into()),
            "k_max" => line(self.k_max.to_string()),
            "band_nodes" => line(self.band_nodes.to_string()),
            "point" if self.points.is_empty() => line(String::new()),
            "point" => self.points.iter().for_each(|x| line(format!("{},{},{}", x[0], x[1], x[2]))),
            "acq_centers" => line(self.acq_centers.to_string()),
            "acq_extent" => line(self.acq_extent.to_string()),
            "acq_min_gap" => line(self.acq_min_gap.to_string()),
            "acq_heights" => line(self.acq_heights.to_string()),
            "fit_nodes" => line(self.fit_nodes.to_string()),
            "fit_quad_sub" => line(self.fit_quad_sub.to_string()),
            "fit_reg" => line(self.fit_reg.to_string()),
            "radon_nodes" => line(self.radon_nodes.to_string()),
            "radon_side" => line(self.radon_side.to_string()),
            "known" => line(self.known.map_or("none".into(), |k| format!("{k:?}").to_lowercase())),
            "known_file" => line(path(&self.known_file)),
            "slice_noise" => line(self.slice_noise.to_string()),
            _ => unreachable!("schema key without a writer: {key}"),
        }
    }

    /// Hash of everything that can change an artifact.
    pub fn content_hash(&self) -> String {
        let mut s = String::new();
        for (key, _) in SCHEMA.iter().filter(|(k, _)| !RUNTIME_KEYS.contains(k) && *k != "stage") {
            self.write_key(&mut s, key);
        }
        sha256_hex(s.as_bytes())
    }

    /// Requested stages, deduplicated, in dependency order.
    pub fn ordered_stages(&self) -> Vec<Stage> {
        let mut s = self.stages.clone();
        s.sort();
        s.dedup();
        s
    }

    pub fn field_grid(&self) -> Result<GridSpec2D> {
        Ok(GridSpec2D::square(self.disk.center, self.field_side, self.field_nodes)?)
    }

    pub fn center_grid(&self) -> Result<GridSpec2D> {
        Ok(GridSpec2D::square(self.disk.center, self.radon_side, self.radon_nodes)?)
    }

    /// Measurement points of the measure stage.
    pub fn measurement_points(&self) -> Vec<[f64; 3]> {
        if self.points.is_empty() {
            robinscat_core::recovery::exterior_points(&self.disk, self.acq_centers, self.acq_extent, self.acq_min_gap, self.acq_heights)
        } else {
            self.points.clone()
        }
    }

    /// Check the model assumptions and the numerical settings before any stage runs.
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            bail!("(A4) violated: ε = {} must be positive", self.epsilon);
        }
        if !(self.p > self.epsilon + 0.5) {
            bail!("(A4) violated: p ≤ ε + 1/2 (p = {}, ε = {})", self.p, self.epsilon);
        }
        let d = &self.disk;
        if !(d.radius > 0.0 && d.radius.is_finite() && d.center.iter().all(|c| c.is_finite())) {
            bail!("(A5) violated: the support disk needs a positive finite radius");
        }
        let fg = self.field_grid().context("(A5) violated: supp A must fit the field grid")?;
        fg.check_support(d).context("(A5) violated: supp A must fit the field grid")?;
        for x in &self.points {
            if !(x[2] > 0.0) {
                bail!("measurement point {x:?} must have x3 > 0");
            }
            if d.center_distance([x[0], x[1]]) <= d.radius {
                bail!("(A3) violated: U′ intersects D at the projection ({}, {}) of a measurement point", x[0], x[1]);
            }
        }
        if self.points.is_empty() {
            if !(self.acq_min_gap > 0.0) {
                bail!("(A3) violated: acq_min_gap = {} lets acquisition centers touch D", self.acq_min_gap);
            }
            if self.acq_centers < 2 || self.acq_heights < 2 || !(self.acq_extent > 2.0 * d.radius) {
                bail!("acquisition grid must have at least 2 centers and heights and extend past the disk");
            }
            if self.measurement_points().is_empty() {
                bail!("(A3) violated: no acquisition center lies outside D");
            }
        }
        if !(self.k_max > 1.0) {
            bail!("band upper edge K = {} must exceed 1", self.k_max);
        }
        if self.band_nodes < 8 {
            bail!("band_nodes = {} is below 8", self.band_nodes);
        }
        if !(self.forward_k > 0.0) || self.norm_k.iter().any(|k| !(*k > 0.0)) || self.born_terms < 2 {
            bail!("forward_k and norm_k must be positive and born_terms at least 2");
        }
        if !(self.fit_reg >= 0.0) || self.fit_quad_sub == 0 || !(self.slice_noise > 0.0) {
            bail!("fit_reg must be nonnegative, fit_quad_sub positive and slice_noise positive");
        }
        robinscat_core::recovery::ModeField::grid_for(d, self.fit_nodes)?;
        let cg = self.center_grid()?;
        robinscat_core::sradon::slice_window(&cg, d).context("radon center grid")?;
        if self.known_file.is_some() && self.known.is_none() {
            bail!("known_file is set but known = none");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_canonical_text_round_trips() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        let back = PipelineConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn lists_repeat_and_overrides_replace() {
        let mut a = Assignments::parse("stage = radon\nstage = synth # comment\npoint = 2,0,0.5\npoint = 0,-3,1\n").unwrap();
        let c = PipelineConfig::from_assignments(&a).unwrap();
        assert_eq!(c.ordered_stages(), vec![Stage::Synth, Stage::Radon]);
        assert_eq!(c.points.len(), 2);
        a.override_with(&["point=4,4,1".into(), "seed=9".into()]).unwrap();
        let c = PipelineConfig::from_assignments(&a).unwrap();
        assert_eq!(c.points, vec![[4.0, 4.0, 1.0]]);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn empty_stage_list() {
        let c = PipelineConfig::from_text("stage =\n").unwrap();
        assert!(c.ordered_stages().is_empty());
        assert_eq!(PipelineConfig::from_text(&c.to_text()).unwrap().stages, vec![]);
    }

    #[test]
    fn bad_input_is_reported() {
        assert!(PipelineConfig::from_text("sede = 1").is_err());
        assert!(PipelineConfig::from_text("seed = 1\nseed = 2").is_err());
        assert!(PipelineConfig::from_text("point = 1,2").is_err());
        assert!(PipelineConfig::from_text("just text").is_err());
    }

    #[test]
    fn assumption_labels() {
        let err = |t: &str| PipelineConfig::from_text(t).unwrap().validate().unwrap_err().to_string();
        assert!(err("p = 0.9").contains("(A4) violated: p ≤ ε + 1/2"));
        assert!(err("epsilon = 0").contains("(A4)"));
        assert!(err("point = 0.5,0,1").contains("(A3)"));
        assert!(err("acq_min_gap = 0").contains("(A3)"));
        assert!(format!("{:#}", PipelineConfig::from_text("disk_radius = 1.3").unwrap().validate().unwrap_err()).contains("(A5)"));
    }

    #[test]
    fn runtime_keys_do_not_change_the_hash() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.threads = 8;
        b.output = "elsewhere".into();
        b.emit_plots = true;
        assert_eq!(a.content_hash(), b.content_hash());
        b.seed = 2;
        assert_ne!(a.content_hash(), b.content_hash());
    }
}
