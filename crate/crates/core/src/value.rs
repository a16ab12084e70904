//! The value algebra shared by the kernel interpreter and the formula evaluator.
//!
//! Implemented for every [`Scalar`] (concrete evaluation) and for [`Term`]
//! (symbolic evaluation), so one interpreter produces both concrete outputs and
//! the synthesis specification.

use std::fmt::Debug;

use crate::scalar::{DomainError, MathFn, Rational, Scalar};
use crate::sym::{Rel, Term};

pub trait Value: Clone + Debug + Send + Sync {
    type Cond: Clone + Debug;

    fn constant(r: &Rational) -> Self;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Result<Self, DomainError>;
    fn neg(&self) -> Self;
    fn apply(&self, f: MathFn) -> Result<Self, DomainError>;
    fn compare(&self, rel: Rel, rhs: &Self) -> Self::Cond;
    fn select(cond: &Self::Cond, a: &Self, b: &Self) -> Self;

    fn max(&self, rhs: &Self) -> Self {
        Self::select(&self.compare(Rel::Gt, rhs), self, rhs)
    }
}

impl<S: Scalar> Value for S {
    type Cond = bool;

    fn constant(r: &Rational) -> Self {
        S::from_rational(r)
    }
    fn add(&self, rhs: &Self) -> Self {
        self.clone() + rhs.clone()
    }
    fn sub(&self, rhs: &Self) -> Self {
        self.clone() - rhs.clone()
    }
    fn mul(&self, rhs: &Self) -> Self {
        self.clone() * rhs.clone()
    }
    fn div(&self, rhs: &Self) -> Result<Self, DomainError> {
        self.checked_div(rhs)
    }
    fn neg(&self) -> Self {
        -self.clone()
    }
    fn apply(&self, f: MathFn) -> Result<Self, DomainError> {
        S::apply(f, self)
    }
    fn compare(&self, rel: Rel, rhs: &Self) -> bool {
        rel.holds(self, rhs)
    }
    fn select(cond: &bool, a: &Self, b: &Self) -> Self {
        if *cond {
            a.clone()
        } else {
            b.clone()
        }
    }
}

impl Value for Term {
    type Cond = Term;

    fn constant(r: &Rational) -> Self {
        Term::constant(r.clone())
    }
    fn add(&self, rhs: &Self) -> Self {
        Term::add(self, rhs)
    }
    fn sub(&self, rhs: &Self) -> Self {
        Term::sub(self, rhs)
    }
    fn mul(&self, rhs: &Self) -> Self {
        Term::mul(self, rhs)
    }
    fn div(&self, rhs: &Self) -> Result<Self, DomainError> {
        Ok(Term::div(self, rhs))
    }
    fn neg(&self) -> Self {
        Term::neg(self)
    }
    fn apply(&self, f: MathFn) -> Result<Self, DomainError> {
        Ok(Term::apply(f, self))
    }
    fn compare(&self, rel: Rel, rhs: &Self) -> Term {
        Term::cmp_rel(rel, self, rhs)
    }
    fn select(cond: &Term, a: &Self, b: &Self) -> Self {
        Term::ite(cond, a, b)
    }
}
