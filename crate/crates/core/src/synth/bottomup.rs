use std::collections::{BTreeSet, HashSet};

use super::{key, Key, Synth};
use crate::formula::{eval, BinOp, Formula, FormulaError, RedOp, F};
use crate::sym::{elem_leaves, Elem, Term};
use crate::tensor::{broadcasts_to, Tensor};

/// Type pruning: keeps well-typed programs that can still reach the target shape.
/// With no growth left, the program itself must broadcast to the target.
pub fn prune_type(dims: Option<&[usize]>, target: &[usize], remaining: usize) -> bool {
    match dims {
        None => false,
        Some(d) => remaining > 0 || broadcasts_to(d, target),
    }
}

/// Value pruning: keeps `value` iff its first element uses only input elements that
/// the target's first element uses.
pub fn prune_value(value: &Tensor<Term>, target: &Tensor<Term>) -> bool {
    let allowed = elem_leaves(&target.data[0]);
    keep_leaves(value, &allowed)
}

fn keep_leaves(value: &Tensor<Term>, allowed: &BTreeSet<Elem>) -> bool {
    value.data.first().map_or(true, |v| elem_leaves(v).is_subset(allowed))
}

struct Run<'t> {
    target: &'t Tensor<Term>,
    allowed: BTreeSet<Elem>,
    seen: HashSet<Key>,
    progs: Vec<(F, Tensor<Term>)>,
    from: usize,
    to: usize,
}

impl Synth<'_> {
    /// Enumerates programs level by level up to depth `to`, pruning after each level,
    /// and returns the first one accepted against `target`. Levels below `from` are
    /// regenerated but neither counted nor checked.
    pub(crate) fn bottom_up(&mut self, target: &Tensor<Term>, from: usize, to: usize) -> Option<F> {
        self.levels(target, from, to, true).err()
    }

    /// Every program admitted up to depth `to`, in generation order.
    pub(crate) fn enumerate(&mut self, target: &Tensor<Term>, to: usize) -> Vec<(F, Tensor<Term>)> {
        self.levels(target, 0, to, false).unwrap_or_default()
    }

    /// Returns `Err(program)` on the first accepted candidate when `check` is set,
    /// otherwise all admitted programs.
    fn levels(&mut self, target: &Tensor<Term>, from: usize, to: usize, check: bool) -> Result<Vec<(F, Tensor<Term>)>, F> {
        self.stats.bottom_up_runs += 1;
        let mut run = Run {
            target,
            allowed: elem_leaves(&target.data[0]),
            seen: HashSet::new(),
            progs: Vec::new(),
            from,
            to,
        };
        let mut counted = 0usize;
        for (f, v) in self.terminals.clone() {
            self.admit(&mut run, f, Ok(v), 0, &mut counted);
        }
        let mut level_start = 0;
        for depth in 0..=to {
            if depth > 0 {
                let prev = level_start;
                level_start = run.progs.len();
                self.grow(&mut run, prev, level_start, depth, &mut counted);
            }
            if check && depth >= from {
                for i in level_start..run.progs.len() {
                    if i % 64 == 0 && self.expired() {
                        return Ok(Vec::new());
                    }
                    let (f, v) = &run.progs[i];
                    if broadcasts_to(&v.dims, &target.dims) && self.checker.check_tensor(v, target).accepted() {
                        return Err(f.clone());
                    }
                }
            }
            if self.expired() || self.budget_hit || run.progs.len() == level_start {
                break;
            }
        }
        Ok(if check { Vec::new() } else { run.progs })
    }

    fn admit(
        &mut self,
        run: &mut Run,
        f: F,
        value: Result<Tensor<Term>, FormulaError>,
        depth: usize,
        counted: &mut usize,
    ) {
        let counts = depth >= run.from;
        let v = match value {
            Ok(v) => v,
            Err(_) => {
                if !self.cfg.enable_type_prune && counts {
                    self.count(counted);
                }
                return;
            }
        };
        if !run.seen.insert(key(&v)) {
            return;
        }
        if self.cfg.enable_type_prune && !prune_type(Some(&v.dims), &run.target.dims, run.to - depth) {
            return;
        }
        if self.cfg.enable_value_prune && !keep_leaves(&v, &run.allowed) {
            return;
        }
        if counts {
            self.count(counted);
        }
        run.progs.push((f, v));
    }

    fn count(&mut self, counted: &mut usize) {
        *counted += 1;
        self.stats.programs += 1;
        if *counted >= self.cfg.max_programs {
            self.budget_hit = true;
        }
    }

    fn grow(&mut self, run: &mut Run, prev: usize, end: usize, depth: usize, counted: &mut usize) {
        let unary = |s: &Synth, a: &F| {
            let mut out = vec![Formula::neg(a.clone())];
            out.extend(s.grammar.fns.iter().map(|g| Formula::apply(*g, a.clone())));
            out.push(Formula::reduce(RedOp::Sum, a.clone()));
            if s.grammar.has_ite {
                out.push(Formula::reduce(RedOp::Max, a.clone()));
            }
            out.push(Formula::permute(a.clone()));
            out
        };
        let stop = |s: &mut Synth, i: usize| s.budget_hit || (i % 32 == 0 && s.expired());
        for i in prev..end {
            if stop(self, i) {
                return;
            }
            let (a, va) = run.progs[i].clone();
            for shape in unary(self, &a) {
                let v = apply(&shape, &[&va]);
                self.admit(run, shape, v, depth, counted);
            }
        }
        for i in 0..end {
            for j in 0..end {
                if i.max(j) < prev {
                    continue;
                }
                if stop(self, i * end + j) {
                    return;
                }
                let (a, va) = run.progs[i].clone();
                let (b, vb) = run.progs[j].clone();
                for op in BinOp::ALL {
                    if op.commutative() && i > j {
                        continue;
                    }
                    let f = Formula::bin(op, a.clone(), b.clone());
                    let v = apply(&f, &[&va, &vb]);
                    self.admit(run, f, v, depth, counted);
                }
                let f = Formula::matmul(a.clone(), b.clone());
                let v = apply(&f, &[&va, &vb]);
                self.admit(run, f, v, depth, counted);
            }
        }
        if self.grammar.has_ite {
            for c in 0..end {
                for i in 0..end {
                    for j in 0..end {
                        if c.max(i).max(j) < prev {
                            continue;
                        }
                        if stop(self, (c * end + i) * end + j) {
                            return;
                        }
                        let f = Formula::if_pos(run.progs[c].0.clone(), run.progs[i].0.clone(), run.progs[j].0.clone());
                        let v = apply(&f, &[&run.progs[c].1, &run.progs[i].1, &run.progs[j].1]);
                        self.admit(run, f, v, depth, counted);
                    }
                }
            }
        }
    }
}

/// Evaluates the top constructor of `f` with its children's values given in order.
fn apply(f: &Formula, children: &[&Tensor<Term>]) -> Result<Tensor<Term>, FormulaError> {
    const SLOTS: [&str; 3] = ["#0", "#1", "#2"];
    let slot = |i: usize| Formula::input(SLOTS[i]);
    let shell = match f {
        Formula::Neg(_) => Formula::Neg(slot(0)),
        Formula::Fn(g, _) => Formula::Fn(*g, slot(0)),
        Formula::Reduce(op, _) => Formula::Reduce(*op, slot(0)),
        Formula::Permute(_) => Formula::Permute(slot(0)),
        Formula::Bin(op, ..) => Formula::Bin(*op, slot(0), slot(1)),
        Formula::MatMul(..) => Formula::MatMul(slot(0), slot(1)),
        Formula::IfPos(..) => Formula::IfPos(slot(0), slot(1), slot(2)),
        _ => unreachable!("terminals are not grown"),
    };
    eval::<Term>(&shell, &|n| SLOTS.iter().position(|s| *s == n).map(|i| children[i].clone()))
}
