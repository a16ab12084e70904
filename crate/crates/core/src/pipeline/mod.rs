//! End-to-end lifting: parse, execute, synthesize, verify, simplify, and test.

mod corpus;
mod difftest;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::exec::{default_shape, execute, LiftSpec};
use crate::formula::F;
use crate::kernel::{parse_kernel, KernelModule, ParamKind};
use crate::scalar::Rational;
use crate::simplify::{simplify_with, SimplifyConfig};
use crate::smt::Solver;
use crate::sym::Rel;
use crate::synth::{synthesize, Phase, SynthConfig};
use crate::verify::{verify, VerifyConfig, VerifyReport};

pub use corpus::{golden_equivalent, load_corpus, run_corpus, Corpus, CorpusError, CorpusFlags, CorpusReport, Entry, KernelResult, Manifest};
pub use difftest::{default_range, differential_test, DiffConfig, DiffOutcome};

#[derive(Debug, Clone)]
pub struct LiftOptions {
    pub synth: SynthConfig,
    /// `None` skips verification.
    pub verify: Option<VerifyConfig>,
    pub simplify: bool,
    pub diff: DiffConfig,
    pub solver: Solver,
}

impl Default for LiftOptions {
    fn default() -> LiftOptions {
        LiftOptions {
            synth: SynthConfig::default(),
            verify: Some(VerifyConfig::default()),
            simplify: true,
            diff: DiffConfig::default(),
            solver: Solver::from_env(Duration::from_secs(30)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesisOutcome {
    pub status: &'static str,
    pub formula: Option<String>,
    pub latex: Option<String>,
    pub phase: Option<Phase>,
    pub programs: usize,
    pub bottom_up_runs: usize,
    #[serde(serialize_with = "crate::serde_secs")]
    pub time: Duration,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LiftReport {
    pub kernel: String,
    pub synthesis: SynthesisOutcome,
    pub verification: Option<VerifyReport>,
    pub simplified: Option<String>,
    pub differential: Option<DiffOutcome>,
    pub simplified_differential: Option<DiffOutcome>,
    /// Why later stages were skipped or degraded.
    pub notes: Vec<String>,
    #[serde(skip)]
    pub formula: Option<F>,
    #[serde(skip)]
    pub simplified_formula: Option<F>,
}

impl LiftReport {
    pub fn synthesized(&self) -> bool {
        self.formula.is_some()
    }

    pub fn verified(&self) -> bool {
        self.verification.as_ref().is_some_and(|v| v.verdict == crate::verify::VerifyVerdict::Verified)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Error)]
pub enum LiftError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
}

pub fn lift_file(path: &Path, opts: &LiftOptions) -> Result<LiftReport, LiftError> {
    let text = std::fs::read_to_string(path).map_err(|source| LiftError::Io { path: path.display().to_string(), source })?;
    let k = parse_kernel(&text).map_err(|e| LiftError::Parse(format!("{}: {}", path.display(), e)))?;
    Ok(lift(&k, opts))
}

/// Input shapes and positivity facts of a specification, for the simplifier.
pub fn simplify_config(k: &KernelModule, spec: &LiftSpec) -> SimplifyConfig {
    let mut shapes: BTreeMap<String, Vec<usize>> = spec.env.dims.clone();
    let mut positive = BTreeSet::new();
    for p in k.params.iter().filter(|p| p.kind == ParamKind::ScalarReal) {
        shapes.insert(p.name.clone(), Vec::new());
        let zero = Rational::from_integer(0.into());
        if let Some((rel, c)) = &p.assume {
            if (*rel == Rel::Gt && *c >= zero) || (*rel == Rel::Ge && *c > zero) {
                positive.insert(p.name.clone());
            }
        }
    }
    SimplifyConfig { shapes, positive, trusted: true, ..SimplifyConfig::default() }
}

/// Runs every stage; a failing stage skips the ones that depend on it.
pub fn lift(k: &KernelModule, opts: &LiftOptions) -> LiftReport {
    let mut report = LiftReport {
        kernel: k.name.clone(),
        synthesis: SynthesisOutcome {
            status: "failed",
            formula: None,
            latex: None,
            phase: None,
            programs: 0,
            bottom_up_runs: 0,
            time: Duration::ZERO,
            reason: None,
        },
        verification: None,
        simplified: None,
        differential: None,
        simplified_differential: None,
        notes: Vec::new(),
        formula: None,
        simplified_formula: None,
    };
    let start = Instant::now();
    let spec = match default_shape(k).and_then(|env| execute(k, &env)) {
        Ok(s) => s,
        Err(e) => {
            report.synthesis.reason = Some(format!("symbolic execution: {}", e));
            report.synthesis.time = start.elapsed();
            report.notes.push("verification, simplification and testing skipped".into());
            return report;
        }
    };
    match synthesize(&spec, &opts.synth, &opts.solver) {
        Ok(s) => {
            report.synthesis = SynthesisOutcome {
                status: "synthesized",
                formula: Some(s.formula.to_string()),
                latex: Some(s.formula.to_latex()),
                phase: Some(s.phase),
                programs: s.stats.programs,
                bottom_up_runs: s.stats.bottom_up_runs,
                time: start.elapsed(),
                reason: None,
            };
            log::debug!("{}: synthesized {} in {:?}", k.name, s.formula, report.synthesis.time);
            report.formula = Some(s.formula);
        }
        Err(e) => {
            report.synthesis.phase = Some(e.phase);
            report.synthesis.programs = e.stats.programs;
            report.synthesis.bottom_up_runs = e.stats.bottom_up_runs;
            report.synthesis.reason = Some(e.reason.to_string());
            report.synthesis.time = start.elapsed();
            report.notes.push("verification, simplification and testing skipped".into());
            return report;
        }
    }
    let f = report.formula.clone().expect("synthesized");
    match &opts.verify {
        Some(cfg) => {
            let v = verify(k, &spec, &f, cfg, &opts.solver);
            log::debug!("{}: {} after {} candidates in {:?}", k.name, v.verdict.label(), v.candidates_tried, v.time);
            report.verification = Some(v);
        }
        None => report.notes.push("verification disabled".into()),
    }
    match differential_test(k, &f, &opts.diff) {
        Ok(d) => report.differential = Some(d),
        Err(e) => report.notes.push(format!("differential test: {}", e)),
    }
    if opts.simplify {
        match simplify_with(&f, &simplify_config(k, &spec)) {
            Ok(s) => {
                report.simplified = Some(s.formula.to_string());
                if !s.stats.saturated {
                    report.notes.push(format!("simplification stopped at a limit after {} iterations", s.stats.iterations));
                }
                match differential_test(k, &s.formula, &opts.diff) {
                    Ok(d) => report.simplified_differential = Some(d),
                    Err(e) => report.notes.push(format!("differential test of simplified form: {}", e)),
                }
                report.simplified_formula = Some(s.formula);
            }
            Err(e) => report.notes.push(format!("simplification: {}", e)),
        }
    }
    report
}
