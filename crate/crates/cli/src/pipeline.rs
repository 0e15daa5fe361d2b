//! Stage runner. Each stage reads its inputs from the output directory
//! (checked against the manifest), writes its artifacts, and records them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use robinscat_core::asymptotics::diagonal_r;
use robinscat_core::field_synth::{build_quadratic_strength, sample_field, sample_gaussian_potential, AnisotropyField, CovarianceModel, FieldRealization, Preset};
use robinscat_core::forward::solver::solve_with;
use robinscat_core::forward::{born_series, born_threshold, measure_dataset, BackscatterDataset, BandDiagnostics, MeasurementConfig, Solver, SlpOperator};
use robinscat_core::io::{read_dataset, sha256_hex, write_dataset, Artifact, ArtifactEntry, DataOrigin, Manifest};
use robinscat_core::numerics::stats::fit_loglog;
use robinscat_core::numerics::sum::{norm_c, rel_l2};
use robinscat_core::recovery::{fit_strength, recover_components, recover_trace, Component, JointFitOptions, KnownComponent, ModeField, RecoveredAnisotropy};
use robinscat_core::sradon::{extract_slices, fourier_radon, radii_grid, radon_forward, slice_window, Centers, RadonGrid, SpectralSlices};
use robinscat_core::GridSpec2D;

use crate::config::{DataMode, PipelineConfig, Stage};
use crate::plots;

pub const MANIFEST: &str = "manifest.json";
/// Power iterations per operator-norm estimate.
const NORM_ITERATIONS: usize = 30;

/// Artifact names and the files that hold them.
pub mod names {
    pub const ANISOTROPY: (&str, &str) = ("anisotropy", "anisotropy.rscf");
    pub const LAMBDA: (&str, &str) = ("lambda", "lambda.rscf");
    pub const FORWARD: (&str, &str) = ("forward_report", "forward.json");
    pub const DATA: (&str, &str) = ("n0", "n0.csv");
    pub const MODES: (&str, &str) = ("strength_fit", "strength_fit.rscf");
    pub const REDUCE: (&str, &str) = ("reduce_report", "reduce.json");
    pub const RADON: (&str, &str) = ("radon", "radon.rscf");
    pub const SLICES: (&str, &str) = ("slices", "slices.rscf");
    pub const RECOVERED: (&str, &str) = ("recovered", "recovered.rscf");
    pub const RECOVERY: (&str, &str) = ("recovery_report", "recovery.json");
    pub const VERIFY: (&str, &str) = ("verify_report", "verify.json");
}
use names::*;

struct Run<'a> {
    cfg: &'a PipelineConfig,
    dir: PathBuf,
    config_sha: String,
    /// Everything known in the output directory, including earlier runs.
    known: Manifest,
    /// Entries written by this run.
    written: Manifest,
}

/// Run the configured stages in dependency order and return the manifest of
/// the artifacts this run wrote. The on-disk manifest also keeps entries from
/// earlier runs that were not overwritten.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Manifest> {
    cfg.validate()?;
    let stages = cfg.ordered_stages();
    if stages.is_empty() {
        log::info!("no stages requested");
        return Ok(Manifest::default());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build()?;
    pool.install(|| run_stages(cfg, &stages))
}

fn run_stages(cfg: &PipelineConfig, stages: &[Stage]) -> Result<Manifest> {
    fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
    let dir = cfg.output.clone();
    let manifest_path = dir.join(MANIFEST);
    let known = if manifest_path.exists() { Manifest::read(&manifest_path)? } else { Manifest::default() };
    let config_sha = cfg.content_hash();
    if !known.is_empty() && known.config_sha256 != config_sha && stages.first() != Some(&Stage::Synth) {
        log::warn!("inputs in {} were produced under a different configuration", dir.display());
    }
    let mut run = Run { cfg, dir, config_sha: config_sha.clone(), known, written: Manifest { config_sha256: config_sha, ..Default::default() } };
    fs::write(run.dir.join("config.txt"), cfg.to_text())?;
    for st in stages {
        log::info!("stage {}", st.name());
        match st {
            Stage::Synth => run.synth(),
            Stage::Forward => run.forward(),
            Stage::Measure => run.measure(),
            Stage::Reduce => run.reduce(),
            Stage::Radon => run.radon(),
            Stage::Recover => run.recover(),
            Stage::Verify => run.verify(),
        }
        .with_context(|| format!("stage {}", st.name()))?;
    }
    run.known.config_sha256 = run.config_sha.clone();
    run.known.write(&manifest_path)?;
    Ok(run.written)
}

impl Run<'_> {
    fn provenance(&self, stage: Stage, inputs: &[&str]) -> Value {
        let inputs: BTreeMap<&str, &str> = inputs.iter().filter_map(|n| self.known.artifacts.get(*n).map(|e| (*n, e.sha256.as_str()))).collect();
        json!({ "stage": stage.name(), "config_sha256": self.config_sha, "inputs": inputs })
    }

    fn record(&mut self, stage: Stage, (name, file): (&str, &str), sha: String, inputs: &[&str]) {
        let e = ArtifactEntry { stage: stage.name().into(), path: file.into(), sha256: sha, inputs: inputs.iter().map(|s| s.to_string()).collect() };
        self.known.record(name, e.clone());
        self.written.record(name, e);
    }

    fn save<A: Artifact>(&mut self, stage: Stage, art: (&str, &str), value: &A, inputs: &[&str]) -> Result<()> {
        let sha = value.save(&self.dir.join(art.1), self.provenance(stage, inputs))?;
        self.record(stage, art, sha, inputs);
        Ok(())
    }

    fn save_json<T: Serialize>(&mut self, stage: Stage, art: (&str, &str), value: &T, inputs: &[&str]) -> Result<()> {
        let body = json!({ "provenance": self.provenance(stage, inputs), "report": value });
        let text = serde_json::to_string_pretty(&body)? + "\n";
        fs::write(self.dir.join(art.1), &text)?;
        self.record(stage, art, sha256_hex(text.as_bytes()), inputs);
        Ok(())
    }

    /// Path of a recorded input after checking its hash against the manifest.
    fn input(&self, (name, _): (&str, &str), producer: Stage) -> Result<PathBuf> {
        let e = self
            .known
            .artifacts
            .get(name)
            .ok_or_else(|| anyhow!("missing input '{name}'; run the {} stage first", producer.name()))?;
        let path = self.dir.join(&e.path);
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        if sha256_hex(&bytes) != e.sha256 {
            bail!("{} changed since the manifest recorded it", path.display());
        }
        Ok(path)
    }

    fn load<A: Artifact>(&self, art: (&str, &str), producer: Stage) -> Result<A> {
        Ok(A::load(&self.input(art, producer)?)?)
    }

    fn report(&self, art: (&str, &str), producer: Stage) -> Result<Value> {
        let v: Value = serde_json::from_str(&fs::read_to_string(self.input(art, producer)?)?)?;
        Ok(v["report"].clone())
    }

    fn plot_dir(&self) -> Result<Option<PathBuf>> {
        if !self.cfg.emit_plots {
            return Ok(None);
        }
        let d = self.dir.join("plots");
        fs::create_dir_all(&d)?;
        Ok(Some(d))
    }

    fn truth(&self) -> Result<AnisotropyField> {
        self.load(ANISOTROPY, Stage::Synth)
    }

    /// Preset behind the synthesized truth, if it came from one.
    fn truth_preset(&self) -> Option<Preset> {
        self.cfg.anisotropy_file.is_none().then_some(self.cfg.preset)
    }

    fn synth(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let grid = cfg.field_grid()?;
        let a = match &cfg.anisotropy_file {
            Some(p) => {
                let mut a = AnisotropyField::load(p).with_context(|| format!("reading {}", p.display()))?;
                if a.disk != cfg.disk {
                    bail!("(A5) violated: the anisotropy file is supported on {:?}, the configuration on {:?}", a.disk, cfg.disk);
                }
                let outside = a.grid.nodes().enumerate().any(|(i, z)| !cfg.disk.contains(z) && (a.a1[i] != 0.0 || a.a2[i] != 0.0 || a.a3[i] != 0.0));
                if outside {
                    bail!("(A5) violated: the anisotropy file does not vanish outside D");
                }
                let rep = a.enforce_psd();
                if rep.clipped_nodes > 0 {
                    log::warn!("clipped negative eigenvalues at {} nodes (most negative {:.3e})", rep.clipped_nodes, rep.min_eigenvalue);
                }
                if !a.grid.same_as(&grid) {
                    let src = a.clone();
                    a = AnisotropyField::from_fn(grid, cfg.disk, |p| src.interp(p))?;
                }
                a
            }
            None => AnisotropyField::preset(grid, cfg.disk, cfg.preset)?,
        };
        let strength = build_quadratic_strength(&a, cfg.epsilon)?;
        let lambda = if cfg.anisotropy_file.is_none() && cfg.preset == Preset::GaussianPotential {
            sample_gaussian_potential(&grid, &cfg.disk, cfg.epsilon, cfg.seed)?
        } else {
            sample_field(&CovarianceModel::new(strength), &grid, cfg.seed)?
        };
        self.save(Stage::Synth, ANISOTROPY, &a, &[])?;
        self.save(Stage::Synth, LAMBDA, &lambda, &[])?;
        Ok(())
    }

    fn forward(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let lambda: FieldRealization = self.load(LAMBDA, Stage::Synth)?;
        let y = cfg.measurement_points()[0];
        let norms: Vec<f64> = cfg
            .norm_k
            .iter()
            .map(|&k| Ok(SlpOperator::new(&lambda.grid, &lambda.disk, k)?.norm_estimate(NORM_ITERATIONS, cfg.seed)))
            .collect::<Result<_>>()?;
        let decay = (norms.len() >= 2).then(|| fit_loglog(&cfg.norm_k, &norms));
        let op = SlpOperator::new(&lambda.grid, &lambda.disk, cfg.forward_k)?;
        let series = born_series(&op, &lambda, y, cfg.forward_k, cfg.p, cfg.born_terms)?;
        let full = solve_with(&op, &lambda, y, cfg.forward_k, cfg.p)?;
        let first = &series.terms[0];
        let diff: Vec<_> = full.density.values.iter().zip(first).map(|(a, b)| a - b).collect();
        let beyond_born = norm_c(&diff) / norm_c(first).max(f64::MIN_POSITIVE);
        let threshold = born_threshold(&lambda, y, cfg.p, &cfg.norm_k, cfg.born_terms)?;
        let report = json!({
            "source": y,
            "norm_k": cfg.norm_k,
            "norm_estimates": norms,
            "norm_decay": decay,
            "born": {
                "k": cfg.forward_k,
                "term_norms": series.term_norms,
                "ratios": series.ratios,
                "residuals": series.residuals,
                "converged": series.converged,
                "full_minus_first_over_first": beyond_born,
                "gmres_history": full.history,
            },
            "born_threshold": threshold,
        });
        if let Some(d) = self.plot_dir()? {
            plots::norm_decay(&d.join("norm_decay.csv"), &cfg.norm_k, &norms)?;
            plots::born_series(&d.join("born_series.csv"), &series.term_norms, &series.residuals)?;
        }
        self.save_json(Stage::Forward, FORWARD, &report, &[LAMBDA.0])
    }

    fn measure(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let points = cfg.measurement_points();
        let mut mc = MeasurementConfig::new(points, cfg.k_max, cfg.epsilon, cfg.disk)?;
        mc.p = cfg.p;
        mc.band_nodes = cfg.band_nodes;
        mc.validate()?;
        let (d, origin, inputs) = match cfg.data {
            DataMode::Asymptotic => {
                let strength = build_quadratic_strength(&self.truth()?, cfg.epsilon)?;
                let n0: Vec<f64> = mc.points.par_iter().map(|x| diagonal_r(&strength, *x)).collect::<robinscat_core::Result<_>>()?;
                let n = n0.len();
                let d = BackscatterDataset {
                    config: mc,
                    n0,
                    stderr: vec![0.0; n],
                    solver: Solver::Born,
                    seeds: Vec::new(),
                    diagnostics: vec![BandDiagnostics::default(); n],
                };
                (d, DataOrigin::Asymptotic, vec![ANISOTROPY.0])
            }
            DataMode::Simulated(solver) => {
                let lambda: FieldRealization = self.load(LAMBDA, Stage::Synth)?;
                (measure_dataset(&lambda, &mc, solver)?, DataOrigin::Simulated, vec![LAMBDA.0])
            }
        };
        if let Some(dir) = self.plot_dir()? {
            if origin == DataOrigin::Simulated {
                plots::band_average(&dir.join("band_average.csv"), &d.diagnostics)?;
            }
        }
        let sha = write_dataset(&d, origin, &self.dir.join(DATA.1))?;
        self.record(Stage::Measure, DATA, sha, &inputs);
        Ok(())
    }

    fn reduce(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let (d, _) = read_dataset(&self.input(DATA, Stage::Measure)?)?;
        let opts = JointFitOptions { fit_nodes: cfg.fit_nodes, quad_sub: cfg.fit_quad_sub, reg: cfg.fit_reg };
        let fit = fit_strength(&d.config.points, &d.n0, &cfg.disk, cfg.epsilon, opts)?;
        let report = json!({
            "residual": fit.residual,
            "n_unknowns": fit.n_unknowns,
            "n_data": fit.n_data,
            "options": fit.options,
        });
        self.save(Stage::Reduce, MODES, &fit.field, &[DATA.0])?;
        self.save_json(Stage::Reduce, REDUCE, &report, &[DATA.0])
    }

    fn radon(&mut self) -> Result<()> {
        let field: ModeField = self.load(MODES, Stage::Reduce)?;
        let cg = self.cfg.center_grid()?;
        let window = slice_window(&cg, &self.cfg.disk)?;
        let radii = radii_grid(window.1, cg.min_spacing() / 2.0);
        let rg: RadonGrid = radon_forward(&field, &Centers::Grid(cg), &radii)?;
        let slices = extract_slices(&fourier_radon(&rg)?, window)?;
        if let Some(d) = self.plot_dir()? {
            plots::slice_magnitudes(&d.join("slice_magnitudes.csv"), &slices)?;
        }
        self.save(Stage::Radon, RADON, &rg, &[MODES.0])?;
        self.save(Stage::Radon, SLICES, &slices, &[RADON.0])
    }

    /// The known component on `grid`, from the configured file or the synthesized truth.
    fn known_values(&self, which: Component, grid: GridSpec2D) -> Result<(Vec<f64>, &'static str)> {
        let (on, name) = match &self.cfg.known_file {
            Some(p) => (on_grid(&AnisotropyField::load(p).with_context(|| format!("reading {}", p.display()))?, grid, None)?, "known_file"),
            None => (on_grid(&self.truth()?, grid, self.truth_preset())?, ANISOTROPY.0),
        };
        let v = match which {
            Component::A1 => on.a1,
            Component::A2 => on.a2,
            Component::A3 => on.a3,
        };
        Ok((v, name))
    }

    fn recover(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let slices: SpectralSlices = self.load(SLICES, Stage::Radon)?;
        let mut inputs = vec![SLICES.0];
        let rec = match cfg.known {
            None => recover_trace(&slices)?,
            Some(which) => {
                let (values, src) = self.known_values(which, slices.grid)?;
                if src == ANISOTROPY.0 {
                    inputs.push(ANISOTROPY.0);
                }
                recover_components(&slices, &KnownComponent { which, values }, cfg.slice_noise, Some(&cfg.disk))?
            }
        };
        let fit = self.report(REDUCE, Stage::Reduce).unwrap_or(Value::Null);
        let conds: Vec<f64> = slices.cond.iter().zip(&slices.valid).filter(|(_, v)| **v).map(|(c, _)| *c).collect();
        let report = json!({
            "diagnostics": rec.diagnostics,
            "strength_fit": fit,
            "slice_condition": {
                "max": conds.iter().cloned().fold(0.0, f64::max),
                "median": robinscat_core::numerics::stats::median(&conds),
            },
            "regularization": {
                "strength_fit": cfg.fit_reg,
                "slice_ridge": robinscat_core::sradon::slices::RIDGE,
                "slice_mode_cond": robinscat_core::sradon::slices::MODE_COND,
                "slice_cond_cap": robinscat_core::sradon::slices::COND_CAP,
            },
            "known": cfg.known,
        });
        self.save(Stage::Recover, RECOVERED, &rec, &inputs)?;
        self.save_json(Stage::Recover, RECOVERY, &report, &[RECOVERED.0, REDUCE.0])
    }

    /// Compares whatever is present: the recovery against the truth and
    /// simulated data against the high-frequency limit.
    fn verify(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let has = |a: (&str, &str)| self.known.artifacts.contains_key(a.0);
        if !has(RECOVERED) && !has(DATA) {
            bail!("nothing to verify; run the recover or measure stage first");
        }
        let mut report = json!({});
        let mut inputs = vec![ANISOTROPY.0];
        if has(RECOVERED) {
            let rec: RecoveredAnisotropy = self.load(RECOVERED, Stage::Recover)?;
            let truth = on_grid(&self.truth()?, rec.grid, self.truth_preset())?;
            let mut errors = BTreeMap::new();
            errors.insert("trace", rel_l2(&rec.trace, &truth.trace()));
            for (n, got, want) in [("a1", &rec.a1, &truth.a1), ("a2", &rec.a2, &truth.a2), ("a3", &rec.a3, &truth.a3)] {
                if let Some(g) = got {
                    errors.insert(n, rel_l2(g, want));
                }
            }
            report["relative_l2"] = json!(errors);
            inputs.push(RECOVERED.0);
            if let Some(d) = self.plot_dir()? {
                plots::error_map(&d.join("recovery_error.csv"), &rec, &truth)?;
            }
        }
        if has(DATA) {
            let (d, meta) = read_dataset(&self.input(DATA, Stage::Measure)?)?;
            if meta.origin == DataOrigin::Simulated {
                let strength = build_quadratic_strength(&self.truth()?, cfg.epsilon)?;
                let limit: Vec<f64> = d.config.points.par_iter().map(|x| diagonal_r(&strength, *x)).collect::<robinscat_core::Result<_>>()?;
                let ratio: Vec<f64> = d.n0.iter().zip(&limit).map(|(a, b)| a / b).collect();
                report["data_vs_limit"] = json!({ "ratio": ratio, "median": robinscat_core::numerics::stats::median(&ratio) });
                inputs.push(DATA.0);
            }
        }
        self.save_json(Stage::Verify, VERIFY, &report, &inputs)
    }
}

/// `src` resampled on `grid`: exactly when it came from `preset`, bilinearly otherwise.
fn on_grid(src: &AnisotropyField, grid: GridSpec2D, preset: Option<Preset>) -> Result<AnisotropyField> {
    if src.grid.same_as(&grid) {
        return Ok(src.clone());
    }
    Ok(match preset {
        Some(p) => AnisotropyField::preset(grid, src.disk, p)?,
        None => AnisotropyField::from_fn(grid, src.disk, |p| src.interp(p))?,
    })
}

/// Location of an artifact of a finished run.
pub fn artifact_path(cfg: &PipelineConfig, art: (&str, &str)) -> PathBuf {
    Path::new(&cfg.output).join(art.1)
}
