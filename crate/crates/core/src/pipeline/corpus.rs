use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{lift, LiftOptions, LiftReport};
use crate::formula::{parse_formula, Formula};
use crate::kernel::{parse_kernel, KernelModule};
use crate::simplify::{parse_rules, probe_shapes, saturate, EGraph, Limits, Rule};
use crate::smt::Solver;
use crate::verify::VerifyConfig;

/// Per-kernel expectations, keyed by kernel file stem.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    /// Expected simplified formula, up to reordering of `+` and `*`.
    pub golden: Option<String>,
    #[serde(default = "yes")]
    pub synth: bool,
    /// `verified` (required) or `unknown` (allowed to end Unknown).
    pub verify: Option<String>,
    /// Sampling interval for differential testing.
    pub range: Option<(f64, f64)>,
    pub note: Option<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct Manifest {
    #[serde(default)]
    pub kernels: BTreeMap<String, Entry>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub kernels: Vec<(String, KernelModule)>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{0}: {1}")]
    Parse(String, String),
}

/// Loads every `.klift` file of `dir` and its optional `manifest.toml`; goldens must parse.
pub fn load_corpus(dir: &Path) -> Result<Corpus, CorpusError> {
    let io = |p: &Path, e| CorpusError::Io(p.display().to_string(), e);
    let mpath = dir.join("manifest.toml");
    let manifest: Manifest = if mpath.exists() {
        let text = std::fs::read_to_string(&mpath).map_err(|e| io(&mpath, e))?;
        toml::from_str(&text).map_err(|e| CorpusError::Manifest(e.to_string()))?
    } else {
        Manifest::default()
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "klift"))
        .collect();
    files.sort();
    let mut kernels = Vec::new();
    for p in files {
        let stem = p.file_stem().unwrap().to_string_lossy().to_string();
        let text = std::fs::read_to_string(&p).map_err(|e| io(&p, e))?;
        let k = parse_kernel(&text).map_err(|e| CorpusError::Parse(p.display().to_string(), e.to_string()))?;
        kernels.push((stem, k));
    }
    for (name, e) in &manifest.kernels {
        if !kernels.iter().any(|(n, _)| n == name) {
            return Err(CorpusError::Manifest(format!("entry {} has no kernel file", name)));
        }
        if let Some(g) = &e.golden {
            parse_formula(g).map_err(|err| CorpusError::Manifest(format!("golden of {}: {}", name, err)))?;
        }
    }
    Ok(Corpus { dir: dir.to_path_buf(), manifest, kernels })
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusFlags {
    pub no_topdown: bool,
    pub no_prune: bool,
    pub no_verify_pattern: bool,
    pub no_verify: bool,
    #[serde(serialize_with = "crate::serde_secs")]
    pub synth_budget: Duration,
    #[serde(serialize_with = "crate::serde_secs")]
    pub vc_timeout: Duration,
    pub workers: usize,
    #[serde(skip)]
    pub solver: Option<Solver>,
    /// Kernel stems to run; all when empty.
    pub only: Vec<String>,
}

impl Default for CorpusFlags {
    fn default() -> CorpusFlags {
        CorpusFlags {
            no_topdown: false,
            no_prune: false,
            no_verify_pattern: false,
            no_verify: false,
            synth_budget: Duration::from_secs(60),
            vc_timeout: Duration::from_secs(30),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            solver: None,
            only: Vec::new(),
        }
    }
}

impl CorpusFlags {
    pub fn options(&self) -> LiftOptions {
        let mut o = LiftOptions::default();
        o.synth.time_budget = self.synth_budget;
        o.synth.enable_topdown = !self.no_topdown;
        o.synth.enable_type_prune = !self.no_prune;
        o.synth.enable_value_prune = !self.no_prune;
        o.verify = (!self.no_verify).then(|| VerifyConfig {
            vc_timeout: self.vc_timeout,
            enable_pattern: !self.no_verify_pattern,
            ..VerifyConfig::default()
        });
        if let Some(s) = &self.solver {
            o.solver = s.clone();
        }
        o
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelResult {
    pub name: String,
    pub report: LiftReport,
    pub expected_synth: bool,
    pub expected_verify: Option<String>,
    /// Whether the simplified formula matches the golden, when both exist.
    pub golden_match: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusReport {
    pub flags: CorpusFlags,
    pub kernels: Vec<KernelResult>,
    pub synthesized: Vec<String>,
    pub verified: Vec<String>,
}

impl CorpusReport {
    pub fn synthesized_set(&self) -> BTreeSet<String> {
        self.synthesized.iter().cloned().collect()
    }

    pub fn verified_set(&self) -> BTreeSet<String> {
        self.verified.iter().cloned().collect()
    }

    pub fn get(&self, name: &str) -> Option<&KernelResult> {
        self.kernels.iter().find(|k| k.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable summary, one row per kernel.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let w = self.kernels.iter().map(|k| k.name.len()).max().unwrap_or(6).max(6);
        writeln!(out, "{:w$}  {:5}  {:8}  {:>8}  {:>5}  {:6}  formula", "kernel", "synth", "verify", "time(s)", "diff", "golden").unwrap();
        for k in &self.kernels {
            let r = &k.report;
            let verify = r.verification.as_ref().map_or("-", |v| v.verdict.label());
            let time = r.synthesis.time.as_secs_f64() + r.verification.as_ref().map_or(0.0, |v| v.time.as_secs_f64());
            let diff = r.differential.as_ref().map_or("-".to_string(), |d| if d.passed { "pass".into() } else { "FAIL".into() });
            let formula = r.simplified.clone().or_else(|| r.synthesis.formula.clone()).unwrap_or_else(|| r.synthesis.reason.clone().unwrap_or_default());
            let synth = if r.synthesized() { "yes" } else { "no" };
            let golden = match k.golden_match {
                Some(true) => "match",
                Some(false) => "DIFF",
                None => "-",
            };
            writeln!(out, "{:w$}  {:5}  {:8}  {:>8.2}  {:>5}  {:6}  {}", k.name, synth, verify, time, diff, golden, formula).unwrap();
        }
        writeln!(out, "synthesized {}/{}, verified {}/{}", self.synthesized.len(), self.kernels.len(), self.verified.len(), self.kernels.len()).unwrap();
        out
    }
}

/// Runs the pipeline over the corpus on `flags.workers` threads; results are in file order.
pub fn run_corpus(corpus: &Corpus, flags: &CorpusFlags) -> CorpusReport {
    let opts = flags.options();
    let jobs: Vec<&(String, KernelModule)> =
        corpus.kernels.iter().filter(|(n, _)| flags.only.is_empty() || flags.only.contains(n)).collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<KernelResult>>> = Mutex::new(vec![None; jobs.len()]);
    std::thread::scope(|s| {
        for _ in 0..flags.workers.max(1).min(jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((name, k)) = jobs.get(i) else { break };
                let entry = corpus.manifest.kernels.get(name).cloned().unwrap_or_default();
                let mut o = opts.clone();
                o.diff.range = entry.range;
                let report = lift(k, &o);
                let golden_match = match (&entry.golden, &report.simplified_formula) {
                    (Some(g), Some(f)) => Some(golden_equivalent(&parse_formula(g).expect("checked at load"), f)),
                    _ => None,
                };
                let r = KernelResult {
                    name: name.clone(),
                    report,
                    expected_synth: entry.synth,
                    expected_verify: entry.verify.clone(),
                    golden_match,
                };
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    let kernels: Vec<KernelResult> = results.into_inner().unwrap().into_iter().map(|r| r.expect("job ran")).collect();
    CorpusReport {
        flags: flags.clone(),
        synthesized: kernels.iter().filter(|k| k.report.synthesized()).map(|k| k.name.clone()).collect(),
        verified: kernels.iter().filter(|k| k.report.verified()).map(|k| k.name.clone()).collect(),
        kernels,
    }
}

const AC_RULES: &str = "
add-comm: a + b => b + a
mul-comm: a * b => b * a
add-assoc: (a + b) + c <=> a + (b + c)
mul-assoc: (a * b) * c <=> a * (b * c)
";

/// Equality up to commutativity and associativity of `+` and `*`.
pub fn golden_equivalent(a: &Formula, b: &Formula) -> bool {
    let both = Formula::bin(crate::formula::BinOp::Add, std::sync::Arc::new(a.clone()), std::sync::Arc::new(b.clone()));
    let Some(shapes) = probe_shapes(&both) else { return a == b };
    let mut g = EGraph::new(shapes, BTreeSet::new());
    let (ia, ib) = (g.add_formula(a), g.add_formula(b));
    g.rebuild();
    let rules = parse_rules(AC_RULES).expect("AC rules parse");
    let rules: Vec<&Rule> = rules.iter().collect();
    saturate(&mut g, &rules, Limits { iterations: 12, nodes: 20_000 });
    g.find(ia) == g.find(ib)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq(a: &str, b: &str) -> bool {
        golden_equivalent(&parse_formula(a).unwrap(), &parse_formula(b).unwrap())
    }

    #[test]
    fn golden_equivalence_is_modulo_ac_only() {
        assert!(eq("x * (y + 1)", "(1 + y) * x"));
        assert!(eq("exp(x) / sum(exp(x))", "exp(x) / sum(exp(x))"));
        assert!(!eq("x - y", "y - x"));
        assert!(!eq("x * (y + 1)", "x * y + x"));
    }
}
