use std::path::Path;
use std::process::Command;

use robinscat_cli::{artifact_path, names, run_pipeline, PipelineConfig, Stage, MANIFEST};

const SMALL: &str = "\
field_nodes = 64
acq_centers = 12
acq_heights = 12
fit_nodes = 16
radon_nodes = 64
norm_k = 4
norm_k = 8
forward_k = 10
born_terms = 4
";

fn small(out: &Path, extra: &str) -> PipelineConfig {
    let mut c = PipelineConfig::from_text(&format!("{SMALL}{extra}")).unwrap();
    c.output = out.to_path_buf();
    c
}

fn shas(m: &robinscat_core::io::Manifest) -> Vec<(String, String)> {
    m.artifacts.iter().map(|(k, e)| (k.clone(), e.sha256.clone())).collect()
}

#[test]
fn empty_stage_list_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let m = run_pipeline(&small(&out, "stage =\n")).unwrap();
    assert!(m.is_empty());
    assert!(!out.exists());
}

#[test]
fn same_config_same_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_pipeline(&small(&dir.path().join("a"), "")).unwrap();
    let b = run_pipeline(&small(&dir.path().join("b"), "")).unwrap();
    assert_eq!(a.artifacts.len(), 11);
    assert_eq!(shas(&a), shas(&b));
    assert_eq!(a.config_sha256, b.config_sha256);
    a.verify(&dir.path().join("a")).unwrap();
}

#[test]
fn assumption_violations_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let inside = small(dir.path(), "point = 0.5, 0.0, 0.3\n");
    let e = run_pipeline(&inside).unwrap_err().to_string();
    assert!(e.contains("(A3)"), "{e}");
    let slow = small(dir.path(), "p = 0.9\n");
    let e = run_pipeline(&slow).unwrap_err().to_string();
    assert!(e.contains("(A4)"), "{e}");
    assert!(!dir.path().join(MANIFEST).exists());
}

#[test]
fn stages_resume_from_recorded_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut c = small(&out, "");
    c.stages = vec![Stage::Reduce];
    let e = format!("{:#}", run_pipeline(&c).unwrap_err());
    assert!(e.contains("missing input") && e.contains("measure"), "{e}");

    let full = run_pipeline(&small(&dir.path().join("full"), "")).unwrap();
    c.stages = vec![Stage::Synth, Stage::Measure];
    run_pipeline(&c).unwrap();
    for st in [Stage::Reduce, Stage::Radon, Stage::Recover] {
        c.stages = vec![st];
        run_pipeline(&c).unwrap();
    }
    let recovered = |m: &robinscat_core::io::Manifest| m.artifacts[names::RECOVERED.0].sha256.clone();
    let m = robinscat_core::io::Manifest::read(&out.join(MANIFEST)).unwrap();
    assert_eq!(recovered(&m), recovered(&full));

    // An artifact edited after the fact is refused.
    std::fs::write(artifact_path(&c, names::SLICES), b"tampered").unwrap();
    c.stages = vec![Stage::Recover];
    let e = format!("{:#}", run_pipeline(&c).unwrap_err());
    assert!(e.contains("changed since"), "{e}");
}

#[test]
fn thread_count_does_not_change_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<_> = [1usize, 2, 8]
        .iter()
        .map(|&t| {
            let mut c = small(&dir.path().join(format!("t{t}")), "");
            c.threads = t;
            shas(&run_pipeline(&c).unwrap())
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

fn robinscat(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_robinscat")).args(args).output().unwrap()
}

#[test]
fn binary_reports_config_errors() {
    let out = robinscat(&["--set", "p=0.8", "show-config"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(A4)"), "{err}");

    let out = robinscat(&["--set", "no_such_key=1", "show-config"]);
    assert!(!out.status.success());
}

#[test]
fn binary_runs_a_single_stage() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("small.conf");
    std::fs::write(&conf, SMALL).unwrap();
    let o = dir.path().join("o");
    let out = robinscat(&["-c", conf.to_str().unwrap(), "-o", o.to_str().unwrap(), "-j", "1", "synth"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(o.join("lambda.rscf").exists() && o.join("anisotropy.rscf").exists());
    let text = String::from_utf8_lossy(&robinscat(&["-c", conf.to_str().unwrap(), "show-config"]).stdout).to_string();
    assert!(text.contains("field_nodes = 64"), "{text}");
}
