//! Verification of a lifted formula against its kernel for every grid size:
//! precondition axioms, a pointwise postcondition, a linear loop invariant over the
//! host loop, and three Hoare verification conditions discharged by the solver.

mod axioms;
mod lin;
mod model;
mod post;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::exec::{run_concrete, ConcreteInputs, LiftSpec, ShapeEnv};
use crate::formula::{eval, Formula};
use crate::kernel::KernelModule;
use crate::scalar::{format_rational, rational_to_f64, rel_error, MathFn};
use crate::smt::{Emitter, Model, Outcome, SmtScript, Solver};
use crate::sym::{elem_leaves, functions, Elem, Term, TermKind};
use crate::tensor::Tensor;

pub use axioms::{function_axioms, gen_precondition, Axiom, AxiomSet};
pub use lin::{IVar, Lin};
pub use model::{transition, Atoms, GridMap, Store, SymShape};
pub use post::{unravel, Pointwise};

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub vc_timeout: Duration,
    /// Overall wall-clock budget for one kernel.
    pub budget: Duration,
    /// Use the per-thread effect abstraction; otherwise only the array template.
    pub enable_pattern: bool,
    /// Directory receiving one SMT-LIB2 file per checked condition.
    pub artifacts: Option<PathBuf>,
}

impl Default for VerifyConfig {
    fn default() -> VerifyConfig {
        VerifyConfig {
            vc_timeout: Duration::from_secs(30),
            budget: Duration::from_secs(120),
            enable_pattern: true,
            artifacts: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum VerifyVerdict {
    Verified,
    /// Input values on which the kernel and the formula disagree: `pid` and `grid`,
    /// then `name[flat index]` for tensor elements and `name` for reals. Elements
    /// not listed are 1.
    Refuted { witness: BTreeMap<String, String> },
    Unknown { reason: String, vc: Option<String> },
}

impl VerifyVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            VerifyVerdict::Verified => "verified",
            VerifyVerdict::Refuted { .. } => "refuted",
            VerifyVerdict::Unknown { .. } => "unknown",
        }
    }

    fn unknown(reason: impl Into<String>, vc: Option<&str>) -> VerifyVerdict {
        VerifyVerdict::Unknown { reason: reason.into(), vc: vc.map(str::to_string) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VcReport {
    pub id: String,
    /// `proved` for syntactic discharge, otherwise the solver outcome of the negation.
    pub result: String,
    #[serde(serialize_with = "crate::serde_secs")]
    pub time: Duration,
}

/// `∀i, 0 ≤ i < a·pid + b ⟹ P(i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Invariant {
    pub a: i64,
    pub b: i64,
}

impl std::fmt::Display for Invariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "forall i, 0 <= i < {}*pid + {} => P(i)", self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Pattern,
    Template,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub verdict: VerifyVerdict,
    pub mode: Mode,
    pub invariant: Option<Invariant>,
    pub candidates_tried: usize,
    pub vcs: Vec<VcReport>,
    pub axioms: Vec<String>,
    pub warnings: Vec<String>,
    #[serde(serialize_with = "crate::serde_secs")]
    pub time: Duration,
}

/// One iteration's effect on the output: lane `k` writes `values[k]` to `stride·pid + k`.
#[derive(Debug, Clone)]
pub struct ThreadEffect {
    pub stride: i64,
    pub values: Vec<Term>,
}

/// Matches the stores of one iteration against the thread pattern.
pub fn abstract_thread_effect(stores: &[Store], out: usize) -> Result<ThreadEffect, String> {
    if stores.is_empty() {
        return Err("the body stores nothing".into());
    }
    let stride = stores[0].addr.coeff(&IVar::Pid);
    if stride < 1 {
        return Err("store address does not advance with pid".into());
    }
    let mut values = vec![None; stores.len()];
    for s in stores {
        if s.tensor != out {
            return Err("stores to more than one tensor".into());
        }
        let off = s.addr.sub(&Lin::pid().scale(stride));
        let Some(k) = off.as_const() else {
            return Err(format!("store address {} is not stride*pid + constant", s.addr));
        };
        if k < 0 || k >= stride || values.len() != stride as usize || values[k as usize].is_some() {
            return Err("lanes do not cover one contiguous stride".into());
        }
        values[k as usize] = Some(s.value.clone());
    }
    Ok(ThreadEffect { stride, values: values.into_iter().map(Option::unwrap).collect() })
}

/// Invariant candidates: `(stride, 0)`, then `|a|, |b| <= bound` lexicographically.
pub fn invariant_candidates(stride: i64, bound: i64) -> Vec<Invariant> {
    let mut out = vec![Invariant { a: stride, b: 0 }];
    for a in -bound..=bound {
        for b in -bound..=bound {
            if (a, b) != (stride, 0) {
                out.push(Invariant { a, b });
            }
        }
    }
    out
}

fn lt(a: &str, b: &str) -> String {
    format!("(< {} {})", a, b)
}

fn range(lo: &str, hi: &str) -> String {
    format!("(and (<= {} i) {})", lo, lt("i", hi))
}

fn inv_bound(inv: Invariant, pid: &str) -> String {
    Lin::var(IVar::Pid).scale(inv.a).add(&Lin::constant(inv.b)).to_smt().replace("pid", pid)
}

/// Verification conditions as closed scripts whose unsatisfiability proves them.
#[derive(Debug, Clone)]
pub struct Vc {
    pub id: String,
    pub script: SmtScript,
}

struct Ctx<'a> {
    k: &'a KernelModule,
    spec: &'a LiftSpec,
    f: &'a Formula,
    cfg: &'a VerifyConfig,
    solver: &'a Solver,
    shape: SymShape,
    atoms: Atoms,
    stores: Vec<Store>,
    out: usize,
    out_dims: Vec<Lin>,
    n: Lin,
    axioms: AxiomSet,
    deadline: Instant,
    vcs: Vec<VcReport>,
}

impl Ctx<'_> {
    fn name(&self, pos: u32) -> &str {
        &self.spec.names[pos as usize]
    }

    fn is_real(&self, pos: u32) -> bool {
        !self.shape.dims.contains_key(self.name(pos))
    }

    /// Array-select naming of atoms.
    fn select_leaf(&self) -> impl Fn(Elem) -> String + '_ {
        move |e: Elem| {
            let (pos, addr) = self.atoms.lookup(e);
            if self.is_real(*pos) {
                self.name(*pos).to_string()
            } else {
                format!("(select {} {})", self.name(*pos), addr.to_smt())
            }
        }
    }

    /// Constant-per-atom naming for quantifier-free lemmas.
    fn const_name(&self, e: Elem) -> String {
        let pos = self.atoms.lookup(e).0;
        if self.is_real(pos) {
            self.name(pos).to_string()
        } else {
            format!("{}_at{}", self.name(pos), e.index)
        }
    }

    fn base(&self, with_model: bool) -> SmtScript {
        let mut s = SmtScript::new("AUFNIRA");
        if with_model {
            s = s.with_model();
        }
        s.declare_const("pid", "Int");
        s.declare_const("G", "Int");
        for t in &self.spec.inputs {
            if !self.shape.dims.contains_key(&t.name) {
                s.declare_const(&t.name, "Real");
            }
        }
        self.axioms.add_to(&mut s);
        match self.shape.grid {
            GridMap::Constant(c) => s.assert(format!("(= G {})", c)),
            GridMap::Linear { .. } => s.assert("(>= G 1)"),
        }
        s
    }

    fn check(&mut self, vc: &Vc) -> Outcome {
        if let Some(dir) = &self.cfg.artifacts {
            let dir = dir.join(&self.spec.kernel);
            if std::fs::create_dir_all(&dir).is_ok() {
                let _ = std::fs::write(dir.join(format!("{}.smt2", vc.id)), vc.script.to_smt2());
            }
        }
        let left = self.deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            self.vcs.push(VcReport { id: vc.id.clone(), result: "timeout".into(), time: Duration::ZERO });
            return Outcome::Unknown("timeout".into());
        }
        let verdict = self.solver.with_timeout(self.cfg.vc_timeout.min(left)).check(&vc.script);
        let result = match &verdict.outcome {
            Outcome::Unknown(r) if r == "timeout" => "timeout".to_string(),
            o => o.label().to_string(),
        };
        self.vcs.push(VcReport { id: vc.id.clone(), result, time: verdict.time });
        verdict.outcome
    }

    fn post_at(&mut self, flat: &Lin) -> Result<Term, String> {
        let params = self.params();
        let mut pw = Pointwise { shape: &self.shape, params: &params, atoms: &mut self.atoms };
        pw.at_flat(self.f, flat, &self.out_dims)
    }

    fn params(&self) -> BTreeMap<String, u32> {
        self.spec.inputs.iter().map(|t| (t.name.clone(), t.param)).collect()
    }

    /// Per-lane lemma `v_k = E(stride·pid + k)`.
    fn lemma(&mut self, k: usize, stride: i64, v: &Term) -> Result<(), VerifyVerdict> {
        let addr = Lin::pid().scale(stride).add(&Lin::constant(k as i64));
        self.lemma_at(format!("lane-{}", k), &addr, v)
    }

    /// `v = E(addr)` for one stored value.
    fn lemma_at(&mut self, id: String, addr: &Lin, v: &Term) -> Result<(), VerifyVerdict> {
        let e = self.post_at(addr).map_err(|r| VerifyVerdict::unknown(r, Some(&id)))?;
        let (v, e) = (v.canon(), e.canon());
        if v == e {
            self.vcs.push(VcReport { id, result: "proved".into(), time: Duration::ZERO });
            return Ok(());
        }
        let mut script = self.base(true);
        let mut leaves: BTreeSet<Elem> = elem_leaves(&v);
        leaves.extend(elem_leaves(&e));
        for l in &leaves {
            script.declare_const(&self.const_name(*l), "Real");
        }
        script.assert(format!("(and (<= 0 pid) {})", lt("pid", "G")));
        let name = |e: Elem| self.const_name(e);
        let mut em = Emitter::new(&name);
        let eq = em.emit(&Term::raw(TermKind::Cmp(crate::sym::Rel::Eq, v, e)));
        script.assert(format!("(not {})", eq));
        let vc = Vc { id: id.clone(), script };
        match self.check(&vc) {
            Outcome::Unsat => Ok(()),
            Outcome::Sat(model) => Err(match self.reproduce(&leaves, &model) {
                Some(witness) => VerifyVerdict::Refuted { witness },
                None => VerifyVerdict::unknown("spurious counterexample", Some(&id)),
            }),
            Outcome::Unknown(r) | Outcome::Crash(r) => Err(VerifyVerdict::unknown(r, Some(&id))),
        }
    }

    /// Replays a lemma model on the concrete interpreter; returns the witness iff the
    /// kernel and the formula disagree on it.
    fn reproduce(&self, leaves: &BTreeSet<Elem>, model: &Model) -> Option<BTreeMap<String, String>> {
        let pid = model.values.get("pid").map(rational_to_f64).unwrap_or(0.0).max(0.0) as i64;
        let grid = match self.shape.grid {
            GridMap::Constant(c) => c,
            GridMap::Linear { .. } => (self.shape.env.grid as i64).max(pid + 1),
        };
        let env = ShapeEnv::bind(self.k, &self.shape.binding_for_grid(self.k, grid)).ok()?;
        let mut tensors: BTreeMap<String, Tensor<f64>> = BTreeMap::new();
        let mut reals: BTreeMap<String, f64> = BTreeMap::new();
        for t in &self.spec.inputs {
            if let Some(d) = env.dims.get(&t.name) {
                tensors.insert(t.name.clone(), Tensor::new(d.clone(), vec![1.0; d.iter().product()]));
            } else {
                reals.insert(t.name.clone(), 1.0);
            }
        }
        let mut witness =
            BTreeMap::from([("pid".to_string(), pid.to_string()), ("grid".to_string(), grid.to_string())]);
        for l in leaves {
            let value = model.values.get(&self.const_name(*l)).cloned().unwrap_or_default();
            let (pos, addr) = self.atoms.lookup(*l);
            let name = self.name(*pos).to_string();
            let x = rational_to_f64(&value);
            match tensors.get_mut(&name) {
                Some(t) => {
                    let at = addr.eval(&|v| match v {
                        IVar::Pid => Some(pid),
                        IVar::Grid => Some(grid),
                        _ => None,
                    })?;
                    *t.data.get_mut(usize::try_from(at).ok()?)? = x;
                    witness.insert(format!("{}[{}]", name, at), format_rational(&value));
                }
                None => {
                    reals.insert(name.clone(), x);
                    witness.insert(name, format_rational(&value));
                }
            }
        }
        let inputs = ConcreteInputs { tensors: tensors.clone(), reals: reals.clone() };
        let out = run_concrete::<f64>(self.k, &env, &inputs).ok()?;
        let got = &out[&self.spec.outputs[0].name];
        let lookup = |n: &str| tensors.get(n).cloned().or_else(|| reals.get(n).map(|v| Tensor::scalar(*v)));
        let want = eval::<f64>(self.f, &lookup).ok()?;
        let want = crate::tensor::expand(&want, &got.dims)?;
        let differs = got.data.iter().zip(&want.data).any(|(a, b)| !(rel_error(*a, *b) <= 1e-9));
        differs.then_some(witness)
    }

    fn invariant_in(&self, inv: Invariant, pid: &str, holds: &dyn Fn(&str) -> String) -> String {
        format!("(forall ((i Int)) (=> {} {}))", range("0", &inv_bound(inv, pid)), holds("i"))
    }

    /// The three conditions over an uninterpreted pointwise predicate `P`.
    fn pattern_vcs(&self, inv: Invariant, effect: &ThreadEffect) -> [Vc; 3] {
        let p = |i: &str| format!("(P {})", i);
        let p_new = |i: &str| format!("(P_new {})", i);
        let decl = |s: &mut SmtScript| {
            s.declare_fun("P", &["Int"], "Bool");
            s.declare_fun("P_new", &["Int"], "Bool");
        };
        let mut init = self.base(false);
        decl(&mut init);
        init.assert(format!("(not {})", self.invariant_in(inv, "0", &p)));

        let mut pres = self.base(false);
        decl(&mut pres);
        pres.assert(format!("(and (<= 0 pid) {})", lt("pid", "G")));
        pres.assert(self.invariant_in(inv, "pid", &p));
        let lo = Lin::pid().scale(effect.stride);
        let hi = lo.add(&Lin::constant(effect.stride));
        pres.assert(format!(
            "(forall ((i Int)) (=> (not {}) (= (P_new i) (P i))))",
            range(&lo.to_smt(), &hi.to_smt())
        ));
        for k in 0..effect.stride {
            pres.assert(p_new(&lo.add(&Lin::constant(k)).to_smt()));
        }
        pres.assert(format!("(not {})", self.invariant_in(inv, "(+ pid 1)", &p_new)));

        let mut exit = self.base(false);
        decl(&mut exit);
        exit.assert("(and (<= 0 pid) (<= pid G) (>= pid G))");
        exit.assert(self.invariant_in(inv, "pid", &p));
        exit.assert(format!("(not (forall ((i Int)) (=> {} (P i))))", range("0", &self.n.to_smt())));
        let tag = |s: &str| format!("{}-a{}-b{}", s, inv.a, inv.b);
        [
            Vc { id: tag("init"), script: init },
            Vc { id: tag("preserve"), script: pres },
            Vc { id: tag("exit"), script: exit },
        ]
    }

    /// Declarations and the pointwise predicate over arrays.
    fn template_base(&mut self) -> Result<SmtScript, String> {
        let e = self.post_at(&Lin::idx())?;
        let mut s = self.base(false);
        for t in &self.spec.inputs {
            if self.shape.dims.contains_key(&t.name) {
                s.declare_const(&t.name, "(Array Int Real)");
            } else {
                s.declare_const(&t.name, "Real");
            }
        }
        let out = self.spec.outputs[0].name.clone();
        s.declare_const(&out, "(Array Int Real)");
        let leaf = self.select_leaf();
        let mut em = Emitter::new(&leaf);
        let body = em.emit(&e);
        s.command(format!("(define-fun P ((arr (Array Int Real)) (i Int)) Bool (= (select arr i) {}))", body));
        Ok(s)
    }

    fn template_vcs(&mut self, inv: Invariant) -> Result<[Vc; 3], String> {
        let base = self.template_base()?;
        let out = self.spec.outputs[0].name.clone();
        let p = |arr: &str| {
            let arr = arr.to_string();
            move |i: &str| format!("(P {} {})", arr, i)
        };
        let mut init = base.clone();
        init.assert(format!("(not {})", self.invariant_in(inv, "0", &p(&out))));

        let mut pres = base.clone();
        pres.assert(format!("(and (<= 0 pid) {})", lt("pid", "G")));
        pres.assert(self.invariant_in(inv, "pid", &p(&out)));
        let leaf = self.select_leaf();
        let mut em = Emitter::new(&leaf);
        let mut chain = out.clone();
        for st in &self.stores {
            chain = format!("(store {} {} {})", chain, st.addr.to_smt(), em.emit(&st.value.canon()));
        }
        drop(em);
        pres.command(format!("(define-fun {}_new () (Array Int Real) {})", out, chain));
        pres.assert(format!("(not {})", self.invariant_in(inv, "(+ pid 1)", &p(&format!("{}_new", out)))));

        let mut exit = base;
        exit.assert("(and (<= 0 pid) (<= pid G) (>= pid G))");
        exit.assert(self.invariant_in(inv, "pid", &p(&out)));
        exit.assert(format!("(not (forall ((i Int)) (=> {} (P {} i))))", range("0", &self.n.to_smt()), out));
        let tag = |s: &str| format!("{}-a{}-b{}", s, inv.a, inv.b);
        Ok([
            Vc { id: tag("init"), script: init },
            Vc { id: tag("preserve"), script: pres },
            Vc { id: tag("exit"), script: exit },
        ])
    }

    /// Tries candidates in order; the first with all three negations unsat wins.
    fn search(&mut self, cands: Vec<Invariant>, build: &mut dyn FnMut(&mut Self, Invariant) -> Result<[Vc; 3], String>, order: [usize; 3]) -> (Option<Invariant>, usize, VerifyVerdict) {
        let mut tried = 0;
        let mut last = VerifyVerdict::unknown("no invariant candidate validated", None);
        'cands: for inv in cands {
            if Instant::now() >= self.deadline {
                last = VerifyVerdict::unknown("verification budget exhausted", None);
                break;
            }
            tried += 1;
            let vcs = match build(self, inv) {
                Ok(v) => v,
                Err(r) => return (None, tried, VerifyVerdict::unknown(r, None)),
            };
            let mark = self.vcs.len();
            for i in order {
                match self.check(&vcs[i]) {
                    Outcome::Unsat => {}
                    Outcome::Sat(_) => {
                        self.vcs.truncate(mark);
                        continue 'cands;
                    }
                    Outcome::Unknown(r) | Outcome::Crash(r) => {
                        return (None, tried, VerifyVerdict::unknown(r, Some(&vcs[i].id)));
                    }
                }
            }
            return (Some(inv), tried, VerifyVerdict::Verified);
        }
        (None, tried, last)
    }

    /// A launch of exactly one thread: the body's effect must establish the post.
    fn single(&mut self, pattern: Option<&ThreadEffect>) -> Result<VerifyVerdict, String> {
        let vc = match pattern {
            Some(effect) => {
                let mut s = self.base(false);
                s.declare_fun("P_new", &["Int"], "Bool");
                s.assert("(= pid 0)");
                for k in 0..effect.stride {
                    s.assert(format!("(P_new {})", k));
                }
                s.assert(format!("(not (forall ((i Int)) (=> {} (P_new i))))", range("0", &self.n.to_smt())));
                Vc { id: "exit-a0-b0".into(), script: s }
            }
            None => {
                let mut s = self.template_base()?;
                let out = self.spec.outputs[0].name.clone();
                let leaf = self.select_leaf();
                let mut em = Emitter::new(&leaf);
                let mut chain = out.clone();
                for st in &self.stores {
                    chain = format!("(store {} {} {})", chain, st.addr.to_smt(), em.emit(&st.value.canon()));
                }
                drop(em);
                s.assert("(= pid 0)");
                s.assert(format!("(not (forall ((i Int)) (=> {} (P {} i))))", range("0", &self.n.to_smt()), chain));
                Vc { id: "exit-a0-b0".into(), script: s }
            }
        };
        Ok(match self.check(&vc) {
            Outcome::Unsat => VerifyVerdict::Verified,
            Outcome::Sat(_) => VerifyVerdict::unknown("post does not hold after the single iteration", Some(&vc.id)),
            Outcome::Unknown(r) | Outcome::Crash(r) => VerifyVerdict::unknown(r, Some(&vc.id)),
        })
    }
}

/// Verifies `f` against kernel `k` for every grid size, with the other size
/// parameters fixed as in `spec`.
pub fn verify(k: &KernelModule, spec: &LiftSpec, f: &Formula, cfg: &VerifyConfig, solver: &Solver) -> VerifyReport {
    let start = Instant::now();
    let mode = if cfg.enable_pattern { Mode::Pattern } else { Mode::Template };
    let mut report = VerifyReport {
        verdict: VerifyVerdict::unknown("not started", None),
        mode,
        invariant: None,
        candidates_tried: 0,
        vcs: Vec::new(),
        axioms: Vec::new(),
        warnings: Vec::new(),
        time: Duration::ZERO,
    };
    let finish = |mut r: VerifyReport, v: VerifyVerdict| {
        r.verdict = v;
        r.time = start.elapsed();
        r
    };
    if spec.outputs.len() != 1 {
        return finish(report, VerifyVerdict::unknown("exactly one output tensor is supported", None));
    }
    let shape = match SymShape::new(k, &spec.env) {
        Ok(s) => s,
        Err(e) => return finish(report, VerifyVerdict::unknown(e, None)),
    };
    let mut atoms = Atoms::default();
    let stores = match transition(k, &shape, &mut atoms) {
        Ok(s) => s,
        Err(e) => return finish(report, VerifyVerdict::unknown(e.to_string(), None)),
    };
    let out = spec.outputs[0].param as usize;
    let out_name = &spec.outputs[0].name;
    let out_dims = shape.dims[out_name].clone();
    let n = match shape.len(out_name) {
        Ok(n) => n,
        Err(e) => return finish(report, VerifyVerdict::unknown(e, None)),
    };
    let mut fns: BTreeSet<MathFn> = BTreeSet::new();
    f.functions(&mut fns);
    for s in &stores {
        functions(&s.value, &mut fns);
    }
    let axioms = gen_precondition(spec, &fns, &|pos| spec.names[pos as usize].clone());
    report.axioms = axioms.functions.iter().chain(&axioms.params).map(|a| a.name.clone()).collect();
    report.warnings = axioms.warnings.clone();
    let mut ctx = Ctx {
        k,
        spec,
        f,
        cfg,
        solver,
        shape,
        atoms,
        stores,
        out,
        out_dims,
        n,
        axioms,
        deadline: start + cfg.budget,
        vcs: Vec::new(),
    };
    let effect = if cfg.enable_pattern {
        match abstract_thread_effect(&ctx.stores, ctx.out) {
            Ok(e) => Some(e),
            Err(r) => {
                report.warnings.push(format!("thread pattern not matched ({}); using the array template", r));
                report.mode = Mode::Template;
                None
            }
        }
    } else {
        None
    };
    if let Some(effect) = &effect {
        for (lane, v) in effect.values.iter().enumerate() {
            if let Err(v) = ctx.lemma(lane, effect.stride, v) {
                report.vcs = ctx.vcs;
                return finish(report, v);
            }
        }
    }
    let verdict = if ctx.shape.grid == GridMap::Constant(1) {
        report.invariant = Some(Invariant { a: 0, b: 0 });
        report.candidates_tried = 1;
        if effect.is_none() && ctx.stores.iter().all(|s| s.addr.as_const().is_some()) {
            for st in ctx.stores.clone() {
                let id = format!("store-{}", st.addr.as_const().unwrap());
                if let Err(v) = ctx.lemma_at(id, &st.addr, &st.value) {
                    report.vcs = ctx.vcs;
                    return finish(report, v);
                }
            }
        }
        ctx.single(effect.as_ref()).unwrap_or_else(|r| VerifyVerdict::unknown(r, None))
    } else {
        let block = k.block_size as i64;
        let (inv, tried, verdict) = match &effect {
            Some(effect) => {
                let e = effect.clone();
                ctx.search(
                    invariant_candidates(effect.stride, block),
                    &mut |c: &mut Ctx, inv| Ok(c.pattern_vcs(inv, &e)),
                    [0, 1, 2],
                )
            }
            None => {
                let stride = ctx.stores.len() as i64;
                ctx.search(invariant_candidates(stride, block), &mut |c: &mut Ctx, inv| c.template_vcs(inv), [0, 2, 1])
            }
        };
        report.invariant = inv;
        report.candidates_tried = tried;
        verdict
    };
    report.vcs = ctx.vcs;
    finish(report, verdict)
}

/// The postcondition `∀i, 0 ≤ i < N ⟹ y[i] = E(i)` as SMT-LIB2 text over arrays.
pub fn gen_postcondition(k: &KernelModule, spec: &LiftSpec, f: &Formula) -> Result<String, String> {
    let shape = SymShape::new(k, &spec.env)?;
    let out = &spec.outputs[0].name;
    let params: BTreeMap<String, u32> = spec.inputs.iter().map(|t| (t.name.clone(), t.param)).collect();
    let mut atoms = Atoms::default();
    let e = Pointwise { shape: &shape, params: &params, atoms: &mut atoms }.at_flat(f, &Lin::idx(), &shape.dims[out])?;
    let n = shape.len(out)?;
    let leaf = |el: Elem| {
        let (pos, addr) = atoms.lookup(el);
        let name = &spec.names[*pos as usize];
        if shape.dims.contains_key(name) {
            format!("(select {} {})", name, addr.to_smt())
        } else {
            name.clone()
        }
    };
    let mut em = Emitter::new(&leaf);
    Ok(format!(
        "(forall ((i Int)) (=> {} (= (select {} i) {})))",
        range("0", &n.to_smt()),
        out,
        em.emit(&e)
    ))
}
