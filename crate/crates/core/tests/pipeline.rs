use std::path::PathBuf;
use std::time::Duration;

use tenslift::formula::parse_formula;
use tenslift::kernel::{parse_kernel, KernelModule};
use tenslift::pipeline::{differential_test, lift, load_corpus, run_corpus, CorpusFlags, DiffConfig, LiftOptions};
use tenslift::simplify::simplify;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn load(name: &str) -> KernelModule {
    parse_kernel(&std::fs::read_to_string(corpus_dir().join(format!("{}.klift", name))).unwrap()).unwrap()
}

#[test]
fn exact_formula_has_zero_error() {
    let d = differential_test(&load("add"), &parse_formula("x1 + x2").unwrap(), &DiffConfig::default()).unwrap();
    assert!(d.passed);
    assert_eq!(d.trials, 100);
    assert_eq!(d.max_rel_error, 0.0);
}

#[test]
fn wrong_formula_fails_the_difftest() {
    let d = differential_test(&load("add"), &parse_formula("x1 - x2").unwrap(), &DiffConfig::default()).unwrap();
    assert!(!d.passed);
    assert!(d.max_rel_error > 0.5, "{}", d.max_rel_error);
}

#[test]
fn simplified_softmax_passes_against_the_kernel() {
    let k = load("softmax");
    let stable = parse_formula("exp(x - max(x)) / sum(exp(x - max(x)))").unwrap();
    let simple = simplify(&stable).unwrap().formula;
    assert_ne!(simple, stable);
    for f in [&stable, &simple] {
        let d = differential_test(&k, f, &DiffConfig::default()).unwrap();
        assert!(d.passed, "{}: {}", f, d.max_rel_error);
        assert!(d.max_rel_error <= 1e-5);
    }
}

#[test]
fn difftest_is_seeded() {
    let k = load("sigmoid");
    let f = parse_formula("1 / (1 + exp(-x))").unwrap();
    let a = differential_test(&k, &f, &DiffConfig::default()).unwrap();
    let b = differential_test(&k, &f, &DiffConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn lift_reports_every_stage() {
    let r = lift(&load("silu"), &LiftOptions::default());
    assert!(r.synthesized());
    assert!(r.verified(), "{:?}", r.verification.as_ref().map(|v| &v.verdict));
    assert!(r.differential.as_ref().unwrap().passed);
    assert!(r.simplified.is_some());
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json["synthesis"]["status"], "synthesized");
    assert_eq!(json["verification"]["verdict"]["status"], "verified");
}

#[test]
fn corpus_runs_are_deterministic() {
    let corpus = load_corpus(&corpus_dir()).unwrap();
    let flags = CorpusFlags {
        only: ["add", "relu", "sum", "softmax"].map(String::from).to_vec(),
        workers: 2,
        synth_budget: Duration::from_secs(30),
        vc_timeout: Duration::from_secs(10),
        ..CorpusFlags::default()
    };
    let a = run_corpus(&corpus, &flags);
    let b = run_corpus(&corpus, &flags);
    assert_eq!(a.kernels.len(), 4);
    assert_eq!(a.synthesized, b.synthesized);
    assert_eq!(a.verified, b.verified);
    for (x, y) in a.kernels.iter().zip(&b.kernels) {
        assert_eq!(x.name, y.name);
        assert_eq!(x.report.synthesis.formula, y.report.synthesis.formula);
        assert_eq!(x.report.simplified, y.report.simplified);
        assert_eq!(x.report.synthesis.programs, y.report.synthesis.programs);
        assert_eq!(x.golden_match, Some(true), "{}", x.name);
    }
}

#[test]
fn manifest_rejects_unknown_fields() {
    let dir = std::env::temp_dir().join(format!("tenslift-manifest-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("manifest.toml"), "[kernels.add]\ngoldn = \"x1 + x2\"\n").unwrap();
    assert!(load_corpus(&dir).is_err());
    std::fs::remove_dir_all(dir).ok();
}
