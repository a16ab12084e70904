use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::{Arc, Weak};

use num_traits::{One, Signed, Zero};
use once_cell::sync::Lazy;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::scalar::{format_rational, MathFn, Rational};

/// An element of an input tensor: parameter position and flat index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Elem {
    pub tensor: u32,
    pub index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rel {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Gt => ">",
            Rel::Ge => ">=",
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Eq => "==",
        }
    }

    pub fn holds<T: PartialOrd>(self, a: &T, b: &T) -> bool {
        match self {
            Rel::Gt => a > b,
            Rel::Ge => a >= b,
            Rel::Lt => a < b,
            Rel::Le => a <= b,
            Rel::Eq => a == b,
        }
    }
}

/// Node payload. Children are interned [`Term`]s, so hashing and equality are shallow.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TermKind {
    Const(Rational),
    Elem(Elem),
    /// n-ary sum; canonical form keeps it flattened and sorted with the constant last.
    Add(Vec<Term>),
    /// n-ary product; same canonical discipline as `Add`.
    Mul(Vec<Term>),
    /// Only in raw terms; `canon` rewrites `a - b` to `a + (-b)`.
    Sub(Term, Term),
    Div(Term, Term),
    Neg(Term),
    Fn(MathFn, Term),
    Ite(Term, Term, Term),
    Cmp(Rel, Term, Term),
}

impl TermKind {
    fn rank(&self) -> u8 {
        match self {
            TermKind::Elem(_) => 0,
            TermKind::Fn(..) => 1,
            TermKind::Neg(_) => 2,
            TermKind::Mul(_) => 3,
            TermKind::Div(..) => 4,
            TermKind::Add(_) => 5,
            TermKind::Sub(..) => 6,
            TermKind::Ite(..) => 7,
            TermKind::Cmp(..) => 8,
            TermKind::Const(_) => 9,
        }
    }

    pub fn children(&self) -> Vec<&Term> {
        match self {
            TermKind::Const(_) | TermKind::Elem(_) => vec![],
            TermKind::Add(xs) | TermKind::Mul(xs) => xs.iter().collect(),
            TermKind::Sub(a, b) | TermKind::Div(a, b) | TermKind::Cmp(_, a, b) => vec![a, b],
            TermKind::Neg(a) | TermKind::Fn(_, a) => vec![a],
            TermKind::Ite(c, a, b) => vec![c, a, b],
        }
    }
}

struct Node {
    id: u64,
    kind: TermKind,
    size: usize,
}

/// A hash-consed symbolic scalar term. Structurally equal terms share one id.
#[derive(Clone)]
pub struct Term(Arc<Node>);

struct Interner {
    table: HashMap<TermKind, Weak<Node>>,
    sweep_at: usize,
}

static INTERNER: Lazy<Mutex<Interner>> = Lazy::new(|| {
    Mutex::new(Interner {
        table: HashMap::new(),
        sweep_at: 1 << 16,
    })
});
static NEXT_ID: AtomicU64 = AtomicU64::new(1);

impl Term {
    /// Interns a node exactly as given, without normalization.
    pub fn raw(kind: TermKind) -> Term {
        let mut interner = INTERNER.lock();
        if let Some(node) = interner.table.get(&kind).and_then(Weak::upgrade) {
            return Term(node);
        }
        let size = 1 + kind.children().iter().map(|c| c.size()).sum::<usize>();
        let node = Arc::new(Node {
            id: NEXT_ID.fetch_add(1, AtomicOrdering::Relaxed),
            kind: kind.clone(),
            size,
        });
        interner.table.insert(kind, Arc::downgrade(&node));
        if interner.table.len() > interner.sweep_at {
            interner.table.retain(|_, w| w.strong_count() > 0);
            interner.sweep_at = (interner.table.len() * 2).max(1 << 16);
        }
        Term(node)
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn kind(&self) -> &TermKind {
        &self.0.kind
    }

    /// Number of nodes in the tree view of this term.
    pub fn size(&self) -> usize {
        self.0.size
    }

    pub fn as_const(&self) -> Option<&Rational> {
        match self.kind() {
            TermKind::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        self.as_const().is_some()
    }

    // ----- canonicalizing constructors -----

    pub fn constant(value: Rational) -> Term {
        Term::raw(TermKind::Const(value))
    }

    pub fn int(value: i64) -> Term {
        Term::constant(crate::scalar::int(value))
    }

    pub fn zero() -> Term {
        Term::constant(Rational::zero())
    }

    pub fn one() -> Term {
        Term::constant(Rational::one())
    }

    pub fn elem(tensor: u32, index: u32) -> Term {
        Term::raw(TermKind::Elem(Elem { tensor, index }))
    }

    pub fn add(a: &Term, b: &Term) -> Term {
        Term::sum(vec![a.clone(), b.clone()])
    }

    pub fn sum(items: Vec<Term>) -> Term {
        let mut flat = Vec::with_capacity(items.len());
        let mut constant = Rational::zero();
        for t in items {
            match t.kind() {
                TermKind::Add(xs) => {
                    for x in xs {
                        match x.as_const() {
                            Some(c) => constant += c,
                            None => flat.push(x.clone()),
                        }
                    }
                }
                TermKind::Const(c) => constant += c,
                _ => flat.push(t),
            }
        }
        if !constant.is_zero() {
            flat.push(Term::constant(constant));
        }
        flat.sort();
        match flat.len() {
            0 => Term::zero(),
            1 => flat.pop().unwrap(),
            _ => Term::raw(TermKind::Add(flat)),
        }
    }

    pub fn mul(a: &Term, b: &Term) -> Term {
        Term::product(vec![a.clone(), b.clone()])
    }

    pub fn product(items: Vec<Term>) -> Term {
        let mut flat = Vec::with_capacity(items.len());
        let mut constant = Rational::one();
        for t in items {
            match t.kind() {
                TermKind::Mul(xs) => {
                    for x in xs {
                        match x.as_const() {
                            Some(c) => constant *= c,
                            None => flat.push(x.clone()),
                        }
                    }
                }
                TermKind::Const(c) => constant *= c,
                _ => flat.push(t),
            }
        }
        if flat.is_empty() {
            return Term::constant(constant);
        }
        if !constant.is_one() {
            flat.push(Term::constant(constant));
        }
        flat.sort();
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Term::raw(TermKind::Mul(flat))
        }
    }

    pub fn sub(a: &Term, b: &Term) -> Term {
        Term::add(a, &Term::neg(b))
    }

    pub fn neg(a: &Term) -> Term {
        match a.kind() {
            TermKind::Const(c) => Term::constant(-c),
            TermKind::Neg(inner) => inner.clone(),
            _ => Term::raw(TermKind::Neg(a.clone())),
        }
    }

    pub fn div(a: &Term, b: &Term) -> Term {
        match (a.as_const(), b.as_const()) {
            (_, Some(d)) if d.is_one() => a.clone(),
            (Some(n), Some(d)) if !d.is_zero() => Term::constant(n / d),
            _ => Term::raw(TermKind::Div(a.clone(), b.clone())),
        }
    }

    pub fn apply(f: MathFn, a: &Term) -> Term {
        Term::raw(TermKind::Fn(f, a.clone()))
    }

    /// Comparison with `<`/`<=` flipped into `>`/`>=`.
    pub fn cmp_rel(rel: Rel, a: &Term, b: &Term) -> Term {
        match rel {
            Rel::Lt => Term::raw(TermKind::Cmp(Rel::Gt, b.clone(), a.clone())),
            Rel::Le => Term::raw(TermKind::Cmp(Rel::Ge, b.clone(), a.clone())),
            _ => Term::raw(TermKind::Cmp(rel, a.clone(), b.clone())),
        }
    }

    pub fn ite(c: &Term, a: &Term, b: &Term) -> Term {
        if a == b {
            return a.clone();
        }
        if let TermKind::Cmp(rel, l, r) = c.kind() {
            if let (Some(x), Some(y)) = (l.as_const(), r.as_const()) {
                return if rel.holds(x, y) { a.clone() } else { b.clone() };
            }
        }
        Term::raw(TermKind::Ite(c.clone(), a.clone(), b.clone()))
    }

    /// `max(a, b) = ite(a > b, a, b)`.
    pub fn max2(a: &Term, b: &Term) -> Term {
        Term::ite(&Term::cmp_rel(Rel::Gt, a, b), a, b)
    }

    /// `max(x1..xn) = ite(x1 > max(x2..xn), x1, max(x2..xn))`.
    pub fn max_of(items: &[Term]) -> Option<Term> {
        let (last, rest) = items.split_last()?;
        Some(rest.iter().rev().fold(last.clone(), |acc, x| Term::max2(x, &acc)))
    }

    /// Re-applies the canonicalizing constructors bottom-up. Idempotent.
    pub fn canon(&self) -> Term {
        let mut memo = HashMap::new();
        self.canon_memo(&mut memo)
    }

    fn canon_memo(&self, memo: &mut HashMap<u64, Term>) -> Term {
        if let Some(t) = memo.get(&self.id()) {
            return t.clone();
        }
        let out = match self.kind() {
            TermKind::Const(_) | TermKind::Elem(_) => self.clone(),
            TermKind::Add(xs) => Term::sum(xs.iter().map(|x| x.canon_memo(memo)).collect()),
            TermKind::Mul(xs) => Term::product(xs.iter().map(|x| x.canon_memo(memo)).collect()),
            TermKind::Sub(a, b) => Term::sub(&a.canon_memo(memo), &b.canon_memo(memo)),
            TermKind::Div(a, b) => Term::div(&a.canon_memo(memo), &b.canon_memo(memo)),
            TermKind::Neg(a) => Term::neg(&a.canon_memo(memo)),
            TermKind::Fn(f, a) => Term::apply(*f, &a.canon_memo(memo)),
            TermKind::Ite(c, a, b) => Term::ite(
                &c.canon_memo(memo),
                &a.canon_memo(memo),
                &b.canon_memo(memo),
            ),
            TermKind::Cmp(r, a, b) => Term::cmp_rel(*r, &a.canon_memo(memo), &b.canon_memo(memo)),
        };
        memo.insert(self.id(), out.clone());
        out
    }

    /// Renders with tensor names looked up by parameter position.
    pub fn display<'a>(&'a self, names: &'a [String]) -> TermDisplay<'a> {
        TermDisplay { term: self, names }
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        self.0.id == other.0.id
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.id.hash(state)
    }
}

impl Ord for Term {
    /// Structural order: kind rank, then leaves by (tensor, index), constants by value.
    /// Independent of interning ids, so it is stable across runs.
    fn cmp(&self, other: &Self) -> Ordering {
        if self.id() == other.id() {
            return Ordering::Equal;
        }
        let (a, b) = (self.kind(), other.kind());
        a.rank().cmp(&b.rank()).then_with(|| match (a, b) {
            (TermKind::Elem(x), TermKind::Elem(y)) => x.cmp(y),
            (TermKind::Const(x), TermKind::Const(y)) => x.cmp(y),
            (TermKind::Fn(f, x), TermKind::Fn(g, y)) => x.cmp(y).then(f.cmp(g)),
            (TermKind::Neg(x), TermKind::Neg(y)) => x.cmp(y),
            (TermKind::Add(xs), TermKind::Add(ys)) | (TermKind::Mul(xs), TermKind::Mul(ys)) => {
                xs.iter().cmp(ys.iter())
            }
            (TermKind::Sub(x1, x2), TermKind::Sub(y1, y2))
            | (TermKind::Div(x1, x2), TermKind::Div(y1, y2)) => x1.cmp(y1).then_with(|| x2.cmp(y2)),
            (TermKind::Ite(x0, x1, x2), TermKind::Ite(y0, y1, y2)) => x1
                .cmp(y1)
                .then_with(|| x2.cmp(y2))
                .then_with(|| x0.cmp(y0)),
            (TermKind::Cmp(r, x1, x2), TermKind::Cmp(s, y1, y2)) => {
                r.cmp(s).then_with(|| x1.cmp(y1)).then_with(|| x2.cmp(y2))
            }
            _ => unreachable!("equal ranks imply equal kinds"),
        })
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display(&[]))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display(&[]))
    }
}

pub struct TermDisplay<'a> {
    term: &'a Term,
    names: &'a [String],
}

impl TermDisplay<'_> {
    fn write(&self, t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match t.kind() {
            TermKind::Const(c) => {
                if c.is_negative() {
                    write!(f, "({})", format_rational(c))
                } else {
                    f.write_str(&format_rational(c))
                }
            }
            TermKind::Elem(e) => match self.names.get(e.tensor as usize) {
                Some(name) => write!(f, "{}[{}]", name, e.index),
                None => write!(f, "t{}[{}]", e.tensor, e.index),
            },
            TermKind::Add(xs) | TermKind::Mul(xs) => {
                let sep = if matches!(t.kind(), TermKind::Add(_)) { " + " } else { " * " };
                f.write_str("(")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    self.write(x, f)?;
                }
                f.write_str(")")
            }
            TermKind::Sub(a, b) => self.binary(f, a, " - ", b),
            TermKind::Div(a, b) => self.binary(f, a, " / ", b),
            TermKind::Neg(a) => {
                f.write_str("-")?;
                self.write(a, f)
            }
            TermKind::Fn(g, a) => {
                write!(f, "{}(", g)?;
                self.write(a, f)?;
                f.write_str(")")
            }
            TermKind::Ite(c, a, b) => {
                f.write_str("ite(")?;
                self.write(c, f)?;
                f.write_str(", ")?;
                self.write(a, f)?;
                f.write_str(", ")?;
                self.write(b, f)?;
                f.write_str(")")
            }
            TermKind::Cmp(r, a, b) => {
                self.write(a, f)?;
                write!(f, " {} ", r.symbol())?;
                self.write(b, f)
            }
        }
    }
}

impl TermDisplay<'_> {
    fn binary(&self, f: &mut fmt::Formatter<'_>, a: &Term, op: &str, b: &Term) -> fmt::Result {
        f.write_str("(")?;
        self.write(a, f)?;
        f.write_str(op)?;
        self.write(b, f)?;
        f.write_str(")")
    }
}

impl fmt::Display for TermDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.term, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, ratio};

    fn x(i: u32) -> Term {
        Term::elem(0, i)
    }

    #[test]
    fn hash_consing_shares_ids() {
        let a = Term::add(&x(0), &x(1));
        let b = Term::add(&x(1), &x(0));
        assert_eq!(a.id(), b.id());
        let raw1 = Term::raw(TermKind::Sub(x(0), x(1)));
        let raw2 = Term::raw(TermKind::Sub(x(0), x(1)));
        assert_eq!(raw1, raw2);
    }

    #[test]
    fn constant_folding_in_chains() {
        let t = Term::raw(TermKind::Add(vec![
            Term::raw(TermKind::Add(vec![Term::int(2), x(0)])),
            Term::int(3),
        ]));
        let c = t.canon();
        assert_eq!(c, Term::raw(TermKind::Add(vec![x(0), Term::int(5)])));
        assert_eq!(format!("{}", c), "(t0[0] + 5)");
    }

    #[test]
    fn commutative_sort_uses_leaf_order() {
        let a = Term::elem(0, 0);
        let b = Term::elem(1, 0);
        let t = Term::raw(TermKind::Mul(vec![b.clone(), a.clone()])).canon();
        assert_eq!(t, Term::raw(TermKind::Mul(vec![a, b])));
    }

    #[test]
    fn subtraction_normalizes_to_negated_addend() {
        let m = Term::max_of(&[x(0), x(1), x(2)]).unwrap();
        let raw = Term::raw(TermKind::Fn(MathFn::Exp, Term::raw(TermKind::Sub(x(0), m.clone()))));
        let c = raw.canon();
        let expected = Term::apply(MathFn::Exp, &Term::sum(vec![x(0), Term::neg(&m)]));
        assert_eq!(c, expected);
        assert_eq!(c.canon(), c);
    }

    #[test]
    fn max_is_right_nested_ite() {
        let m = Term::max_of(&[x(0), x(1), x(2)]).unwrap();
        let inner = Term::max2(&x(1), &x(2));
        assert_eq!(m, Term::ite(&Term::cmp_rel(Rel::Gt, &x(0), &inner), &x(0), &inner));
    }

    #[test]
    fn lt_flips_to_gt() {
        assert_eq!(
            Term::cmp_rel(Rel::Lt, &x(0), &x(1)),
            Term::cmp_rel(Rel::Gt, &x(1), &x(0))
        );
    }

    #[test]
    fn constant_div_and_neg_fold() {
        assert_eq!(Term::div(&Term::int(1), &Term::int(4)).as_const(), Some(&ratio(1, 4)));
        assert_eq!(Term::neg(&Term::int(3)).as_const(), Some(&int(-3)));
        assert_eq!(Term::neg(&Term::neg(&x(0))), x(0));
        assert!(matches!(Term::div(&Term::int(1), &Term::int(0)).kind(), TermKind::Div(..)));
    }
}
