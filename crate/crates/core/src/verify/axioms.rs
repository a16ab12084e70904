use std::collections::BTreeSet;

use serde::Serialize;

use crate::exec::LiftSpec;
use crate::scalar::MathFn;
use crate::smt::{fn_symbol, rational_literal, SmtScript};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Axiom {
    pub name: String,
    /// Closed SMT-LIB2 formula.
    pub smt: String,
}

/// Function axioms plus declared parameter assumptions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AxiomSet {
    pub functions: Vec<Axiom>,
    pub params: Vec<Axiom>,
    /// Functions with no library axioms.
    pub warnings: Vec<String>,
    /// Every function symbol the axioms mention.
    #[serde(skip)]
    pub symbols: BTreeSet<MathFn>,
}

fn ax(name: &str, smt: String) -> Axiom {
    Axiom { name: name.to_string(), smt }
}

/// Library axioms for the given functions.
pub fn function_axioms(fns: &BTreeSet<MathFn>) -> AxiomSet {
    let mut set = AxiomSet::default();
    let e = fn_symbol(MathFn::Exp);
    for f in fns {
        let s = fn_symbol(*f);
        set.symbols.insert(*f);
        match f {
            MathFn::Exp => {
                set.functions.push(ax("exp-positive", format!("(forall ((v Real)) (> ({} v) 0.0))", s)));
                set.functions.push(ax(
                    "exp-monotone",
                    format!("(forall ((a Real) (b Real)) (=> (< a b) (< ({s} a) ({s} b))))"),
                ));
            }
            MathFn::Log => {
                set.symbols.insert(MathFn::Exp);
                set.functions.push(ax("log-exp", format!("(forall ((v Real)) (= ({s} ({e} v)) v))")));
                set.functions
                    .push(ax("exp-log", format!("(forall ((v Real)) (=> (> v 0.0) (= ({e} ({s} v)) v)))")));
            }
            MathFn::Sqrt => set
                .functions
                .push(ax("sqrt-nonnegative", format!("(forall ((v Real)) (=> (>= v 0.0) (>= ({s} v) 0.0)))"))),
            MathFn::Tanh => set.functions.push(ax(
                "tanh-range",
                format!("(forall ((v Real)) (and (< (- 1.0) ({s} v)) (< ({s} v) 1.0)))"),
            )),
            MathFn::Abs => set.functions.push(ax("abs-nonnegative", format!("(forall ((v Real)) (>= ({s} v) 0.0))"))),
            MathFn::Sin | MathFn::Cos => set.warnings.push(format!("no axioms for {}", f.name())),
        }
    }
    set
}

/// Axioms for every function in the lift spec and formula, and the kernel's declared
/// real-parameter assumptions. `leaf` names the SMT constant of a 0-d real input.
pub fn gen_precondition(spec: &LiftSpec, fns: &BTreeSet<MathFn>, leaf: &dyn Fn(u32) -> String) -> AxiomSet {
    let mut set = function_axioms(fns);
    for (pos, (rel, bound)) in &spec.real_assumptions {
        set.params.push(ax(
            &format!("{}-assumption", spec.names[*pos as usize]),
            format!("({} {} {})", crate::smt::emit_rel(*rel), leaf(*pos), rational_literal(bound)),
        ));
    }
    set
}

impl AxiomSet {
    pub fn is_empty(&self) -> bool {
        self.functions.is_empty() && self.params.is_empty()
    }

    /// Declares every function symbol and asserts every axiom.
    pub fn add_to(&self, script: &mut SmtScript) {
        for f in &self.symbols {
            script.declare_fun(&fn_symbol(*f), &["Real"], "Real");
        }
        for a in self.functions.iter().chain(&self.params) {
            script.comment(&a.name);
            script.assert(a.smt.clone());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_contents() {
        let set = function_axioms(&BTreeSet::from([MathFn::Exp]));
        assert_eq!(set.functions[0].smt, "(forall ((v Real)) (> (f_exp v) 0.0))");
        assert!(function_axioms(&BTreeSet::new()).is_empty());
        let sin = function_axioms(&BTreeSet::from([MathFn::Sin]));
        assert!(sin.functions.is_empty());
        assert_eq!(sin.warnings, vec!["no axioms for sin"]);
    }
}
