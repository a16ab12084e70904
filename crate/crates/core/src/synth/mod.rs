//! Formula synthesis from a lifting specification: top-down decomposition over
//! the structure of the output terms, with pruned bottom-up enumeration at the
//! leaves and as a standalone fallback.

mod bottomup;
mod check;
mod topdown;

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::exec::LiftSpec;
use crate::formula::{Formula, F};
use crate::scalar::{MathFn, Rational};
use crate::smt::Solver;
use crate::sym::{functions, leaves, Term, TermKind};
use crate::tensor::Tensor;

pub use bottomup::{prune_type, prune_value};
pub use check::{CheckResult, Checker};
pub use topdown::{guess_sum, split_by, SplitOp, SumShape};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthConfig {
    /// Growth bound for bottom-up enumeration over the whole output.
    pub max_depth: usize,
    /// Growth bound for bottom-up enumeration at top-down leaves.
    pub leaf_depth: usize,
    pub time_budget: Duration,
    pub enable_topdown: bool,
    pub enable_value_prune: bool,
    pub enable_type_prune: bool,
    /// Cap on retained programs per bottom-up run.
    pub max_programs: usize,
}

impl Default for SynthConfig {
    fn default() -> SynthConfig {
        SynthConfig {
            max_depth: 4,
            leaf_depth: 2,
            time_budget: Duration::from_secs(60),
            enable_topdown: true,
            enable_value_prune: true,
            enable_type_prune: true,
            max_programs: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    TopDown,
    BottomUp,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SynthStats {
    /// Bottom-up programs retained after pruning, summed over every run.
    pub programs: usize,
    pub bottom_up_runs: usize,
    pub solver_calls: usize,
    #[serde(serialize_with = "crate::serde_secs")]
    pub time: Duration,
}

#[derive(Debug, Clone)]
pub struct Synthesized {
    pub formula: F,
    pub phase: Phase,
    pub stats: SynthStats,
    pub check: CheckResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthFailure {
    #[error("time budget exhausted")]
    Timeout,
    #[error("search space exhausted")]
    Exhausted,
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Error)]
#[error("synthesis failed in {phase:?} after {} programs: {reason}", stats.programs)]
pub struct SynthError {
    pub reason: SynthFailure,
    pub phase: Phase,
    pub stats: SynthStats,
}

type Key = (Vec<usize>, Vec<Term>);

fn key(t: &Tensor<Term>) -> Key {
    (t.dims.clone(), t.data.clone())
}

/// Productions available to bottom-up growth, restricted to what the lift spec uses.
#[derive(Debug, Clone, Default)]
pub(crate) struct Grammar {
    pub fns: BTreeSet<MathFn>,
    pub has_ite: bool,
}

pub(crate) struct Synth<'a> {
    pub cfg: &'a SynthConfig,
    /// Live length of the block, the addend count of a row sum.
    pub live: usize,
    pub checker: Checker<'a>,
    pub grammar: Grammar,
    pub terminals: Vec<(F, Tensor<Term>)>,
    pub deadline: Instant,
    pub timed_out: bool,
    pub budget_hit: bool,
    pub stats: SynthStats,
    pub memo: HashMap<Key, Option<F>>,
    /// Whether the root was solved by bottom-up enumeration.
    pub root_bottom_up: bool,
}

impl<'a> Synth<'a> {
    pub fn new(spec: &'a LiftSpec, cfg: &'a SynthConfig, solver: &'a Solver) -> Synth<'a> {
        let mut grammar = Grammar::default();
        let mut consts: BTreeSet<Rational> = [Rational::from_integer(0.into()), Rational::from_integer(1.into())].into();
        for out in &spec.outputs {
            for t in &out.elems {
                functions(t, &mut grammar.fns);
                grammar.has_ite |= has_ite(t);
                consts.extend(leaves(t).consts);
            }
        }
        let inputs: HashMap<String, Tensor<Term>> =
            spec.inputs.iter().map(|t| (t.name.clone(), t.to_tensor())).collect();
        let mut terminals: Vec<(F, Tensor<Term>)> =
            spec.inputs.iter().map(|t| (Formula::input(&t.name), t.to_tensor())).collect();
        for t in &spec.inputs {
            if t.dims.len() == 2 {
                let f = Formula::permute(Formula::input(&t.name));
                let v = crate::formula::eval::<Term>(&f, &|n| inputs.get(n).cloned()).expect("2-d transpose");
                terminals.push((f, v));
            }
        }
        for c in consts {
            terminals.push((Formula::constant(c.clone()), Tensor::scalar(Term::constant(c))));
        }
        Synth {
            cfg,
            live: spec.live,
            checker: Checker::new(spec, solver),
            grammar,
            terminals,
            deadline: Instant::now() + cfg.time_budget,
            timed_out: false,
            budget_hit: false,
            stats: SynthStats::default(),
            memo: HashMap::new(),
            root_bottom_up: false,
        }
    }

    pub fn expired(&mut self) -> bool {
        if Instant::now() >= self.deadline {
            self.timed_out = true;
        }
        self.timed_out
    }
}

fn has_ite(t: &Term) -> bool {
    matches!(t.kind(), TermKind::Ite(..)) || t.kind().children().into_iter().any(has_ite)
}

/// The canonical target tensor of the lift spec's (first) output.
pub fn target(spec: &LiftSpec) -> Tensor<Term> {
    spec.outputs[0].to_tensor().map(Term::canon)
}

/// Bottom-up enumeration alone: every program the configured pruning admits up to
/// `depth`, with its symbolic value, in generation order.
pub fn enumerate(spec: &LiftSpec, cfg: &SynthConfig, depth: usize, solver: &Solver) -> Vec<(F, Tensor<Term>)> {
    let mut s = Synth::new(spec, cfg, solver);
    s.enumerate(&target(spec), depth)
}

/// Synthesizes a formula for the lift spec's output, checked against it.
pub fn synthesize(spec: &LiftSpec, cfg: &SynthConfig, solver: &Solver) -> Result<Synthesized, SynthError> {
    let start = Instant::now();
    let mut s = Synth::new(spec, cfg, solver);
    s.checker.deadline = Some(s.deadline);
    let phase0 = if cfg.enable_topdown { Phase::TopDown } else { Phase::BottomUp };
    let fail = |s: &mut Synth, reason: SynthFailure, phase| {
        s.stats.solver_calls = s.checker.solver_calls;
        s.stats.time = start.elapsed();
        SynthError { reason, phase, stats: s.stats.clone() }
    };
    if spec.outputs.len() != 1 {
        return Err(fail(&mut s, SynthFailure::Unsupported("exactly one output tensor is supported".into()), phase0));
    }
    let target = target(spec);
    let found = if cfg.enable_topdown {
        s.solve_root(&target)
    } else {
        let f = s.bottom_up(&target, 0, cfg.max_depth);
        s.root_bottom_up = f.is_some();
        f
    };
    let phase = if s.root_bottom_up { Phase::BottomUp } else { phase0 };
    let Some(f) = found else {
        let reason = if s.timed_out { SynthFailure::Timeout } else { SynthFailure::Exhausted };
        return Err(fail(&mut s, reason, phase));
    };
    let f = Formula::resugar(&f);
    let check = s.checker.check_formula(&f, &target);
    if !check.accepted() {
        return Err(fail(&mut s, SynthFailure::Unsupported(format!("final check failed: {:?}", check)), phase));
    }
    s.stats.solver_calls = s.checker.solver_calls;
    s.stats.time = start.elapsed();
    Ok(Synthesized { formula: f, phase, stats: s.stats, check })
}
