//! High-level tensor formulas: the lifted artifact.

mod eval;
mod latex;
mod parse;
mod print;
mod shape;

use std::collections::BTreeSet;
use std::sync::Arc;

use num_traits::Zero;

use crate::scalar::{MathFn, Rational};

pub use eval::{eval, FormulaError};
pub use parse::{parse_formula, FormulaParseError};
pub use shape::{infer_shape, ShapeError};

pub type F = Arc<Formula>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    /// Elementwise product with broadcasting (covers scalar × and ⊙).
    Mul,
    Div,
}

impl BinOp {
    pub const ALL: [BinOp; 4] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub fn commutative(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Mul)
    }
}

pub use crate::kernel::RedOp;

/// Mathematical constants recognized by constant recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NamedConst {
    Log2E,
    Ln2,
    E,
    Pi,
    Sqrt2OverPi,
    InvSqrt2Pi,
}

impl NamedConst {
    pub const ALL: [NamedConst; 6] = [
        NamedConst::Log2E,
        NamedConst::Ln2,
        NamedConst::E,
        NamedConst::Pi,
        NamedConst::Sqrt2OverPi,
        NamedConst::InvSqrt2Pi,
    ];

    pub fn value(self) -> f64 {
        use std::f64::consts::*;
        match self {
            NamedConst::Log2E => LOG2_E,
            NamedConst::Ln2 => LN_2,
            NamedConst::E => E,
            NamedConst::Pi => PI,
            NamedConst::Sqrt2OverPi => (2.0 / PI).sqrt(),
            NamedConst::InvSqrt2Pi => 1.0 / (2.0 * PI).sqrt(),
        }
    }

    /// Token in the formula text syntax.
    pub fn token(self) -> &'static str {
        match self {
            NamedConst::Log2E => "log2(e)",
            NamedConst::Ln2 => "ln(2)",
            NamedConst::E => "e",
            NamedConst::Pi => "pi",
            NamedConst::Sqrt2OverPi => "sqrt_2_over_pi",
            NamedConst::InvSqrt2Pi => "inv_sqrt_2pi",
        }
    }

    pub fn latex(self) -> &'static str {
        match self {
            NamedConst::Log2E => "\\log_2 e",
            NamedConst::Ln2 => "\\ln 2",
            NamedConst::E => "e",
            NamedConst::Pi => "\\pi",
            NamedConst::Sqrt2OverPi => "\\sqrt{2/\\pi}",
            NamedConst::InvSqrt2Pi => "\\frac{1}{\\sqrt{2\\pi}}",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Input(String),
    Const(Rational),
    Named(NamedConst),
    Neg(F),
    Fn(MathFn, F),
    Bin(BinOp, F, F),
    /// Row-wise reduction along the last axis, keeping it with length 1.
    Reduce(RedOp, F),
    /// 2-D transpose.
    Permute(F),
    MatMul(F, F),
    /// Elementwise `if cond > 0 then a else b`.
    IfPos(F, F, F),
}

impl Formula {
    pub fn input(name: &str) -> F {
        Arc::new(Formula::Input(name.to_string()))
    }
    pub fn constant(r: Rational) -> F {
        Arc::new(Formula::Const(r))
    }
    pub fn named(c: NamedConst) -> F {
        Arc::new(Formula::Named(c))
    }
    pub fn neg(a: F) -> F {
        Arc::new(Formula::Neg(a))
    }
    pub fn apply(f: MathFn, a: F) -> F {
        Arc::new(Formula::Fn(f, a))
    }
    pub fn bin(op: BinOp, a: F, b: F) -> F {
        Arc::new(Formula::Bin(op, a, b))
    }
    pub fn reduce(op: RedOp, a: F) -> F {
        Arc::new(Formula::Reduce(op, a))
    }
    pub fn permute(a: F) -> F {
        Arc::new(Formula::Permute(a))
    }
    pub fn matmul(a: F, b: F) -> F {
        Arc::new(Formula::MatMul(a, b))
    }
    pub fn if_pos(c: F, a: F, b: F) -> F {
        Arc::new(Formula::IfPos(c, a, b))
    }

    pub fn children(&self) -> Vec<&F> {
        match self {
            Formula::Input(_) | Formula::Const(_) | Formula::Named(_) => vec![],
            Formula::Neg(a) | Formula::Fn(_, a) | Formula::Reduce(_, a) | Formula::Permute(a) => vec![a],
            Formula::Bin(_, a, b) | Formula::MatMul(a, b) => vec![a, b],
            Formula::IfPos(c, a, b) => vec![c, a, b],
        }
    }

    /// Height with terminals at depth 0.
    pub fn depth(&self) -> usize {
        self.children().iter().map(|c| c.depth() + 1).max().unwrap_or(0)
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn inputs(&self, out: &mut BTreeSet<String>) {
        if let Formula::Input(n) = self {
            out.insert(n.clone());
        }
        for c in self.children() {
            c.inputs(out);
        }
    }

    pub fn functions(&self, out: &mut BTreeSet<MathFn>) {
        if let Formula::Fn(f, _) = self {
            out.insert(*f);
        }
        for c in self.children() {
            c.functions(out);
        }
    }

    pub fn constants(&self, out: &mut Vec<Rational>) {
        if let Formula::Const(c) = self {
            out.push(c.clone());
        }
        for c in self.children() {
            c.constants(out);
        }
    }

    /// Rewrites `a + (-b)` to `a - b` and `(-a) + b` to `b - a`, bottom-up.
    pub fn resugar(f: &F) -> F {
        let rebuilt = match &**f {
            Formula::Input(_) | Formula::Const(_) | Formula::Named(_) => return f.clone(),
            Formula::Neg(a) => Formula::neg(Formula::resugar(a)),
            Formula::Fn(g, a) => Formula::apply(*g, Formula::resugar(a)),
            Formula::Reduce(op, a) => Formula::reduce(*op, Formula::resugar(a)),
            Formula::Permute(a) => Formula::permute(Formula::resugar(a)),
            Formula::MatMul(a, b) => Formula::matmul(Formula::resugar(a), Formula::resugar(b)),
            Formula::IfPos(c, a, b) => {
                Formula::if_pos(Formula::resugar(c), Formula::resugar(a), Formula::resugar(b))
            }
            Formula::Bin(op, a, b) => {
                let (a, b) = (Formula::resugar(a), Formula::resugar(b));
                match (op, &*a, &*b) {
                    (BinOp::Add, _, Formula::Neg(nb)) => Formula::bin(BinOp::Sub, a.clone(), nb.clone()),
                    (BinOp::Add, Formula::Neg(na), _) => Formula::bin(BinOp::Sub, b.clone(), na.clone()),
                    (BinOp::Add, _, Formula::Const(c)) if c < &Rational::zero() => {
                        Formula::bin(BinOp::Sub, a.clone(), Formula::constant(-c))
                    }
                    _ => Formula::bin(*op, a, b),
                }
            }
        };
        rebuilt
    }

    pub fn to_latex(&self) -> String {
        latex::to_latex(self)
    }
}

impl std::fmt::Display for Formula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print::to_text(self))
    }
}
