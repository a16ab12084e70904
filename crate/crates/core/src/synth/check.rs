use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::LiftSpec;
use crate::formula::{eval as eval_formula, Formula};
use crate::scalar::{rational_to_f64, rel_error, MathFn, Rational};
use crate::smt::{Emitter, Outcome, SmtScript, Solver};
use crate::sym::{elem_leaves, eval, functions, has_fn, Elem, Rel, Term};
use crate::tensor::{expand, Tensor};
use crate::verify::gen_precondition;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckResult {
    Accepted { syntactic: bool },
    /// Input values (by SMT symbol name) on which candidate and target differ.
    Rejected { witness: BTreeMap<String, Rational> },
    Unknown { reason: String },
}

impl CheckResult {
    pub fn accepted(&self) -> bool {
        matches!(self, CheckResult::Accepted { .. })
    }
}

/// Candidate checking against a spec: canonical equality, then numeric probes, then
/// the solver on the disjunction of element disequalities.
pub struct Checker<'a> {
    pub spec: &'a LiftSpec,
    pub solver: &'a Solver,
    points: Vec<HashMap<Elem, Rational>>,
    pub solver_calls: usize,
    /// Solver calls are cut off at this instant.
    pub deadline: Option<Instant>,
}

const PROBES: usize = 3;

impl<'a> Checker<'a> {
    pub fn new(spec: &'a LiftSpec, solver: &'a Solver) -> Checker<'a> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut points = Vec::new();
        for p in 0..PROBES {
            let mut point = HashMap::new();
            for input in &spec.inputs {
                let assume = spec.real_assumptions.iter().find(|(pos, _)| *pos == input.param).map(|a| &a.1);
                for (i, _) in input.elems.iter().enumerate() {
                    let mut n: i64 = rng.gen_range(1..=12);
                    if p > 0 && rng.gen_bool(0.5) {
                        n = -n;
                    }
                    let mut v = Rational::new(n.into(), rng.gen_range(1i64..=4).into());
                    if let Some((rel, bound)) = assume {
                        if !rel.holds(&v, bound) {
                            v = bound + Rational::new(1.into(), 8.into());
                            if !rel.holds(&v, bound) {
                                v = bound - Rational::new(1.into(), 8.into());
                            }
                        }
                    }
                    point.insert(Elem { tensor: input.param, index: i as u32 }, v);
                }
            }
            points.push(point);
        }
        Checker { spec, solver, points, solver_calls: 0, deadline: None }
    }

    pub fn symbol(&self, e: Elem) -> String {
        format!("{}_{}", self.spec.names[e.tensor as usize], e.index)
    }

    /// Symbolic inputs as tensors, by name.
    pub fn inputs(&self) -> BTreeMap<String, Tensor<Term>> {
        self.spec.inputs.iter().map(|t| (t.name.clone(), t.to_tensor())).collect()
    }

    /// Evaluates `f` on the symbolic inputs.
    pub fn evaluate(&self, f: &Formula) -> Option<Tensor<Term>> {
        let inputs = self.inputs();
        eval_formula::<Term>(f, &|n| inputs.get(n).cloned()).ok()
    }

    pub fn check_formula(&mut self, f: &Formula, target: &Tensor<Term>) -> CheckResult {
        match self.evaluate(f) {
            Some(t) => self.check_tensor(&t, target),
            None => CheckResult::Rejected { witness: BTreeMap::new() },
        }
    }

    /// The first probe point on which candidate and target differ, or on which the
    /// target is defined and the candidate is not.
    fn probe(&self, pairs: &[(Term, Term)]) -> Option<usize> {
        for (p, point) in self.points.iter().enumerate() {
            for (c, t) in pairs {
                let differs = if !has_fn(c) && !has_fn(t) {
                    let lookup = |e: Elem| point.get(&e).cloned();
                    match (eval::<Rational>(t, &lookup), eval::<Rational>(c, &lookup)) {
                        (Ok(b), Ok(a)) => Some(a != b),
                        (Ok(_), Err(_)) => Some(true),
                        _ => None,
                    }
                } else {
                    let lookup = |e: Elem| point.get(&e).map(rational_to_f64);
                    match (eval::<f64>(t, &lookup), eval::<f64>(c, &lookup)) {
                        (Ok(b), Ok(a)) => Some(rel_error(a, b) > 1e-6),
                        (Ok(_), Err(_)) => Some(true),
                        _ => None,
                    }
                };
                match differs {
                    Some(true) => return Some(p),
                    Some(false) => {}
                    None => break,
                }
            }
        }
        None
    }

    fn witness_from_point(&self, p: usize, pairs: &[(Term, Term)]) -> BTreeMap<String, Rational> {
        let mut leaves = BTreeSet::new();
        for (c, t) in pairs {
            leaves.extend(elem_leaves(c));
            leaves.extend(elem_leaves(t));
        }
        leaves.into_iter().map(|e| (self.symbol(e), self.points[p][&e].clone())).collect()
    }

    pub fn check_tensor(&mut self, cand: &Tensor<Term>, target: &Tensor<Term>) -> CheckResult {
        let Some(cand) = expand(cand, &target.dims) else {
            return CheckResult::Rejected { witness: BTreeMap::new() };
        };
        let pairs: Vec<(Term, Term)> = cand
            .data
            .iter()
            .zip(&target.data)
            .filter_map(|(c, t)| {
                let (c, t) = (c.canon(), t.canon());
                (c != t).then_some((c, t))
            })
            .collect();
        if pairs.is_empty() {
            return CheckResult::Accepted { syntactic: true };
        }
        if let Some(p) = self.probe(&pairs) {
            return CheckResult::Rejected { witness: self.witness_from_point(p, &pairs) };
        }
        self.solve(&pairs)
    }

    fn solve(&mut self, pairs: &[(Term, Term)]) -> CheckResult {
        self.solver_calls += 1;
        let mut script = SmtScript::new("ALL").with_model();
        let mut leaves = BTreeSet::new();
        let mut fns: BTreeSet<MathFn> = BTreeSet::new();
        for (c, t) in pairs {
            leaves.extend(elem_leaves(c));
            leaves.extend(elem_leaves(t));
            functions(c, &mut fns);
            functions(t, &mut fns);
        }
        for (pos, _) in &self.spec.real_assumptions {
            leaves.insert(Elem { tensor: *pos, index: 0 });
        }
        for e in &leaves {
            script.declare_const(&self.symbol(*e), "Real");
        }
        let names = &self.spec.names;
        let axioms = gen_precondition(self.spec, &fns, &|pos| format!("{}_0", names[pos as usize]));
        axioms.add_to(&mut script);
        let leaf = |e: Elem| format!("{}_{}", names[e.tensor as usize], e.index);
        let mut emitter = Emitter::new(&leaf);
        let diseqs: Vec<String> = pairs
            .iter()
            .map(|(c, t)| emitter.emit(&Term::raw(crate::sym::TermKind::Cmp(Rel::Eq, c.clone(), t.clone()))))
            .map(|eq| format!("(not {})", eq))
            .collect();
        script.assert(if diseqs.len() == 1 { diseqs[0].clone() } else { format!("(or {})", diseqs.join(" ")) });
        let mut solver = self.solver.clone();
        if let Some(deadline) = self.deadline {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return CheckResult::Unknown { reason: "timeout".into() };
            }
            solver = solver.with_timeout(solver.timeout.min(left));
        }
        match solver.check(&script).outcome {
            Outcome::Unsat => CheckResult::Accepted { syntactic: false },
            Outcome::Sat(model) => CheckResult::Rejected {
                witness: leaves
                    .iter()
                    .filter_map(|e| model.values.get(&self.symbol(*e)).map(|v| (self.symbol(*e), v.clone())))
                    .collect(),
            },
            Outcome::Unknown(r) => CheckResult::Unknown { reason: r },
            Outcome::Crash(r) => CheckResult::Unknown { reason: r },
        }
    }
}
