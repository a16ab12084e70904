use std::collections::HashMap;

use num_traits::{Signed, Zero};

use crate::scalar::{MathFn, Rational};
use crate::sym::{Elem, Rel, Term, TermKind};

/// Uninterpreted function symbol for a math function. Solvers reserve some of
/// the plain names (`exp` in z3), so every symbol carries a prefix.
pub fn fn_symbol(f: MathFn) -> String {
    format!("f_{}", f.name())
}

/// Exact real literal: `3.0`, `(- 3.0)`, `(/ 1.0 3.0)`.
pub fn rational_literal(r: &Rational) -> String {
    let body = if r.is_integer() {
        format!("{}.0", r.numer().abs())
    } else {
        format!("(/ {}.0 {}.0)", r.numer().abs(), r.denom())
    };
    if r.is_negative() && !r.is_zero() {
        format!("(- {})", body)
    } else {
        body
    }
}

pub fn emit_rel(rel: Rel) -> &'static str {
    match rel {
        Rel::Gt => ">",
        Rel::Ge => ">=",
        Rel::Lt => "<",
        Rel::Le => "<=",
        Rel::Eq => "=",
    }
}

/// Renders terms as SMT-LIB2 expressions. Leaves are named by a caller-supplied
/// function; subterms shared within one expression are bound with `let`, and the
/// binder names follow traversal order, so output does not depend on interning ids.
pub struct Emitter<'a> {
    leaf: &'a dyn Fn(Elem) -> String,
    /// Every math function emitted so far.
    pub functions: std::collections::BTreeSet<MathFn>,
}

impl<'a> Emitter<'a> {
    pub fn new(leaf: &'a dyn Fn(Elem) -> String) -> Emitter<'a> {
        Emitter { leaf, functions: Default::default() }
    }

    pub fn emit(&mut self, t: &Term) -> String {
        let mut uses: HashMap<u64, usize> = HashMap::new();
        count_uses(t, &mut uses);
        let mut order = Vec::new();
        let mut seen = std::collections::HashSet::new();
        post_order(t, &mut seen, &mut order);
        let mut names: HashMap<u64, String> = HashMap::new();
        let mut bindings = Vec::new();
        for node in &order {
            if node.id() == t.id() {
                continue;
            }
            let shared = uses.get(&node.id()).copied().unwrap_or(0) > 1;
            let compound = !matches!(node.kind(), TermKind::Const(_) | TermKind::Elem(_));
            if shared && compound {
                let body = self.node(node, &names);
                let name = format!("?s{}", bindings.len());
                bindings.push((name.clone(), body));
                names.insert(node.id(), name);
            }
        }
        let mut out = self.node(t, &names);
        for (name, body) in bindings.into_iter().rev() {
            out = format!("(let (({} {})) {})", name, body, out);
        }
        out
    }

    fn child(&mut self, t: &Term, names: &HashMap<u64, String>) -> String {
        match names.get(&t.id()) {
            Some(n) => n.clone(),
            None => self.node(t, names),
        }
    }

    fn node(&mut self, t: &Term, names: &HashMap<u64, String>) -> String {
        match t.kind() {
            TermKind::Const(c) => rational_literal(c),
            TermKind::Elem(e) => (self.leaf)(*e),
            TermKind::Add(xs) | TermKind::Mul(xs) => {
                let op = if matches!(t.kind(), TermKind::Add(_)) { "+" } else { "*" };
                let args: Vec<String> = xs.iter().map(|x| self.child(x, names)).collect();
                format!("({} {})", op, args.join(" "))
            }
            TermKind::Sub(a, b) => format!("(- {} {})", self.child(a, names), self.child(b, names)),
            TermKind::Div(a, b) => format!("(/ {} {})", self.child(a, names), self.child(b, names)),
            TermKind::Neg(a) => format!("(- {})", self.child(a, names)),
            TermKind::Fn(f, a) => {
                self.functions.insert(*f);
                format!("({} {})", fn_symbol(*f), self.child(a, names))
            }
            TermKind::Ite(c, a, b) => {
                format!("(ite {} {} {})", self.child(c, names), self.child(a, names), self.child(b, names))
            }
            TermKind::Cmp(r, a, b) => {
                format!("({} {} {})", emit_rel(*r), self.child(a, names), self.child(b, names))
            }
        }
    }
}

fn count_uses(t: &Term, uses: &mut HashMap<u64, usize>) {
    let n = uses.entry(t.id()).or_insert(0);
    *n += 1;
    if *n > 1 {
        return;
    }
    for c in t.kind().children() {
        count_uses(c, uses);
    }
}

fn post_order(t: &Term, seen: &mut std::collections::HashSet<u64>, out: &mut Vec<Term>) {
    if !seen.insert(t.id()) {
        return;
    }
    for c in t.kind().children() {
        post_order(c, seen, out);
    }
    out.push(t.clone());
}
