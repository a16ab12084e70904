use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use super::term::{Elem, Term, TermKind};
use crate::scalar::{DomainError, Rational, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("no value bound for element t{}[{}]", .0.tensor, .0.index)]
    Unbound(Elem),
    #[error("comparison used as a value")]
    BoolAsValue,
}

/// Evaluates `t` with element values supplied by `lookup`. Shared subterms are
/// evaluated once.
pub fn eval<S: Scalar>(t: &Term, lookup: &dyn Fn(Elem) -> Option<S>) -> Result<S, EvalError> {
    let mut memo = HashMap::new();
    eval_memo(t, lookup, &mut memo)
}

fn eval_memo<S: Scalar>(
    t: &Term,
    lookup: &dyn Fn(Elem) -> Option<S>,
    memo: &mut HashMap<u64, S>,
) -> Result<S, EvalError> {
    if let Some(v) = memo.get(&t.id()) {
        return Ok(v.clone());
    }
    let v = match t.kind() {
        TermKind::Const(c) => S::from_rational(c),
        TermKind::Elem(e) => lookup(*e).ok_or(EvalError::Unbound(*e))?,
        TermKind::Add(xs) => {
            let mut acc = S::zero();
            for x in xs {
                acc = acc + eval_memo(x, lookup, memo)?;
            }
            acc
        }
        TermKind::Mul(xs) => {
            let mut acc = S::one();
            for x in xs {
                acc = acc * eval_memo(x, lookup, memo)?;
            }
            acc
        }
        TermKind::Sub(a, b) => eval_memo(a, lookup, memo)? - eval_memo(b, lookup, memo)?,
        TermKind::Div(a, b) => {
            let (a, b) = (eval_memo(a, lookup, memo)?, eval_memo(b, lookup, memo)?);
            a.checked_div(&b)?
        }
        TermKind::Neg(a) => -eval_memo(a, lookup, memo)?,
        TermKind::Fn(f, a) => S::apply(*f, &eval_memo(a, lookup, memo)?)?,
        TermKind::Ite(c, a, b) => {
            if eval_cond(c, lookup, memo)? {
                eval_memo(a, lookup, memo)?
            } else {
                eval_memo(b, lookup, memo)?
            }
        }
        TermKind::Cmp(..) => return Err(EvalError::BoolAsValue),
    };
    memo.insert(t.id(), v.clone());
    Ok(v)
}

fn eval_cond<S: Scalar>(
    c: &Term,
    lookup: &dyn Fn(Elem) -> Option<S>,
    memo: &mut HashMap<u64, S>,
) -> Result<bool, EvalError> {
    match c.kind() {
        TermKind::Cmp(rel, a, b) => {
            let (a, b) = (eval_memo(a, lookup, memo)?, eval_memo(b, lookup, memo)?);
            Ok(rel.holds(&a, &b))
        }
        _ => Ok(eval_memo(c, lookup, memo)? != S::zero()),
    }
}

/// Numeric substitution: evaluates every leaf exactly and returns a constant term.
pub fn substitute(t: &Term, binding: &HashMap<Elem, Rational>) -> Result<Term, EvalError> {
    let v = eval::<Rational>(t, &|e| binding.get(&e).cloned())?;
    Ok(Term::constant(v))
}

/// The leaves reachable in a term.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LeafSet {
    pub elems: BTreeSet<Elem>,
    pub consts: BTreeSet<Rational>,
}

pub fn leaves(t: &Term) -> LeafSet {
    let mut out = LeafSet::default();
    let mut seen = HashSet::new();
    let mut stack = vec![t.clone()];
    while let Some(t) = stack.pop() {
        if !seen.insert(t.id()) {
            continue;
        }
        match t.kind() {
            TermKind::Const(c) => {
                out.consts.insert(c.clone());
            }
            TermKind::Elem(e) => {
                out.elems.insert(*e);
            }
            kind => stack.extend(kind.children().into_iter().cloned()),
        }
    }
    out
}

/// Element leaves only; cheaper when constants are irrelevant.
pub fn elem_leaves(t: &Term) -> BTreeSet<Elem> {
    leaves(t).elems
}

/// Whether any uninterpreted function occurs in `t`.
pub fn has_fn(t: &Term) -> bool {
    let mut seen = HashSet::new();
    let mut stack = vec![t.clone()];
    while let Some(t) = stack.pop() {
        if !seen.insert(t.id()) {
            continue;
        }
        if matches!(t.kind(), TermKind::Fn(..)) {
            return true;
        }
        stack.extend(t.kind().children().into_iter().cloned());
    }
    false
}

/// Every math function occurring in `t`.
pub fn functions(t: &Term, out: &mut BTreeSet<crate::scalar::MathFn>) {
    let mut seen = HashSet::new();
    let mut stack = vec![t.clone()];
    while let Some(t) = stack.pop() {
        if !seen.insert(t.id()) {
            continue;
        }
        if let TermKind::Fn(f, _) = t.kind() {
            out.insert(*f);
        }
        stack.extend(t.kind().children().into_iter().cloned());
    }
}
