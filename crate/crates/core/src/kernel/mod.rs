//! The block/grid kernel DSL: AST, parser, pretty-printer and host-loop model.

mod lexer;
mod parser;
mod pretty;

use std::collections::BTreeMap;
use std::fmt;

use crate::scalar::{MathFn, Rational};
use crate::sym::Rel;

pub use parser::{parse_kernel, Diagnostic, ParseErrors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamKind {
    TensorIn,
    TensorOut,
    ScalarInt,
    ScalarReal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    /// Logical shape of a tensor parameter.
    pub dims: Vec<SizeExpr>,
    /// Integer parameter defined in terms of others (`stride: int = cols`).
    pub defined_as: Option<SizeExpr>,
    /// Declared assumption on a real parameter (`eps: real > 0`).
    pub assume: Option<(Rel, Rational)>,
}

impl Param {
    pub fn is_tensor(&self) -> bool {
        matches!(self.kind, ParamKind::TensorIn | ParamKind::TensorOut)
    }
}

/// Integer size/launch expression over scalar-int parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SizeExpr {
    Lit(i64),
    Param(String),
    Block,
    Add(Box<SizeExpr>, Box<SizeExpr>),
    Sub(Box<SizeExpr>, Box<SizeExpr>),
    Mul(Box<SizeExpr>, Box<SizeExpr>),
    /// Exact division; evaluating a non-divisible quotient is an error.
    Div(Box<SizeExpr>, Box<SizeExpr>),
}

impl SizeExpr {
    pub fn eval(&self, ints: &BTreeMap<String, i64>, block: i64) -> Result<i64, String> {
        Ok(match self {
            SizeExpr::Lit(v) => *v,
            SizeExpr::Param(p) => *ints.get(p).ok_or_else(|| format!("unbound size parameter {}", p))?,
            SizeExpr::Block => block,
            SizeExpr::Add(a, b) => a.eval(ints, block)? + b.eval(ints, block)?,
            SizeExpr::Sub(a, b) => a.eval(ints, block)? - b.eval(ints, block)?,
            SizeExpr::Mul(a, b) => a.eval(ints, block)? * b.eval(ints, block)?,
            SizeExpr::Div(a, b) => {
                let (x, y) = (a.eval(ints, block)?, b.eval(ints, block)?);
                if y == 0 || x % y != 0 {
                    return Err(format!("{} is not divisible by {}", x, y));
                }
                x / y
            }
        })
    }

    pub fn params(&self, out: &mut Vec<String>) {
        match self {
            SizeExpr::Param(p) => {
                if !out.contains(p) {
                    out.push(p.clone())
                }
            }
            SizeExpr::Lit(_) | SizeExpr::Block => {}
            SizeExpr::Add(a, b) | SizeExpr::Sub(a, b) | SizeExpr::Mul(a, b) | SizeExpr::Div(a, b) => {
                a.params(out);
                b.params(out);
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        let mut ps = Vec::new();
        self.params(&mut ps);
        ps.is_empty()
    }

    /// Affine: products need a constant side, divisors are constant.
    pub fn is_affine(&self) -> bool {
        match self {
            SizeExpr::Lit(_) | SizeExpr::Param(_) | SizeExpr::Block => true,
            SizeExpr::Add(a, b) | SizeExpr::Sub(a, b) => a.is_affine() && b.is_affine(),
            SizeExpr::Mul(a, b) => {
                a.is_affine() && b.is_affine() && (a.is_constant() || b.is_constant())
            }
            SizeExpr::Div(a, b) => a.is_affine() && b.is_constant(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KBinOp {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
}

impl KBinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            KBinOp::Add => "+",
            KBinOp::Sub => "-",
            KBinOp::Mul => "*",
            KBinOp::Div => "/",
            KBinOp::FloorDiv => "//",
            KBinOp::Mod => "%",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RedOp {
    Sum,
    Max,
}

impl RedOp {
    pub fn name(self) -> &'static str {
        match self {
            RedOp::Sum => "sum",
            RedOp::Max => "max",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KExpr {
    Var(String),
    ProgramId,
    BlockSize,
    Int(i64),
    Real(Rational),
    Arange(Box<KExpr>, Box<KExpr>),
    Load(Box<KExpr>),
    Bin(KBinOp, Box<KExpr>, Box<KExpr>),
    Neg(Box<KExpr>),
    Math(MathFn, Box<KExpr>),
    Reduce(RedOp, Box<KExpr>),
    Where(Box<KExpr>, Box<KExpr>, Box<KExpr>),
    Cmp(Rel, Box<KExpr>, Box<KExpr>),
}

impl KExpr {
    /// Value of an expression built only from integer literals and `BLOCK_SIZE`.
    pub fn const_int(&self, block: i64) -> Option<i64> {
        match self {
            KExpr::Int(v) => Some(*v),
            KExpr::BlockSize => Some(block),
            KExpr::Neg(a) => Some(-a.const_int(block)?),
            KExpr::Bin(op, a, b) => {
                let (x, y) = (a.const_int(block)?, b.const_int(block)?);
                match op {
                    KBinOp::Add => Some(x + y),
                    KBinOp::Sub => Some(x - y),
                    KBinOp::Mul => Some(x * y),
                    KBinOp::FloorDiv if y != 0 => Some(x.div_euclid(y)),
                    KBinOp::Mod if y != 0 => Some(x.rem_euclid(y)),
                    _ => None,
                }
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign(String, KExpr),
    Store(KExpr, KExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelModule {
    pub name: String,
    pub params: Vec<Param>,
    pub block_size: u32,
    pub grid_expr: SizeExpr,
    /// Number of live lanes per block; defaults to the block size.
    pub live: Option<SizeExpr>,
    pub body: Vec<Stmt>,
}

impl KernelModule {
    pub fn param(&self, name: &str) -> Option<(usize, &Param)> {
        self.params.iter().enumerate().find(|(_, p)| p.name == name)
    }

    pub fn shapes(&self) -> BTreeMap<&str, &[SizeExpr]> {
        self.params
            .iter()
            .filter(|p| p.is_tensor())
            .map(|p| (p.name.as_str(), p.dims.as_slice()))
            .collect()
    }

    pub fn inputs(&self) -> impl Iterator<Item = (usize, &Param)> {
        self.params.iter().enumerate().filter(|(_, p)| p.kind == ParamKind::TensorIn)
    }

    pub fn outputs(&self) -> impl Iterator<Item = (usize, &Param)> {
        self.params.iter().enumerate().filter(|(_, p)| p.kind == ParamKind::TensorOut)
    }

    /// Scalar-int parameters that must be chosen (not defined from others).
    pub fn free_int_params(&self) -> Vec<&str> {
        self.params
            .iter()
            .filter(|p| p.kind == ParamKind::ScalarInt && p.defined_as.is_none())
            .map(|p| p.name.as_str())
            .collect()
    }

    /// Resolves defined int parameters given values for the free ones.
    pub fn resolve_ints(&self, free: &BTreeMap<String, i64>) -> Result<BTreeMap<String, i64>, String> {
        let mut ints = free.clone();
        let mut pending: Vec<&Param> = self
            .params
            .iter()
            .filter(|p| p.kind == ParamKind::ScalarInt && p.defined_as.is_some())
            .collect();
        while !pending.is_empty() {
            let before = pending.len();
            pending.retain(|p| match p.defined_as.as_ref().unwrap().eval(&ints, self.block_size as i64) {
                Ok(v) => {
                    ints.insert(p.name.clone(), v);
                    false
                }
                Err(_) => true,
            });
            if pending.len() == before {
                let p = pending[0];
                return Err(p.defined_as.as_ref().unwrap().eval(&ints, self.block_size as i64).unwrap_err());
            }
        }
        Ok(ints)
    }

    pub fn pretty(&self) -> String {
        pretty::print_kernel(self)
    }
}

impl fmt::Display for KernelModule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}

/// The grid launch viewed as a sequential loop `for pid in 0..bound { body }`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostLoop {
    pub pid: String,
    pub bound: SizeExpr,
    pub block_size: u32,
    pub body: Vec<Stmt>,
}

impl HostLoop {
    pub fn single_iteration(&self) -> bool {
        self.bound == SizeExpr::Lit(1)
    }
}

impl fmt::Display for HostLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} = 0", self.pid)?;
        writeln!(f, "while {} < {}:", self.pid, pretty::print_size(&self.bound))?;
        for s in &self.body {
            writeln!(f, "    {}", pretty::print_stmt(s).replace("program_id", &self.pid))?;
        }
        write!(f, "    {} = {} + 1", self.pid, self.pid)
    }
}

pub fn sequentialize(k: &KernelModule) -> HostLoop {
    HostLoop {
        pid: "pid".to_string(),
        bound: k.grid_expr.clone(),
        block_size: k.block_size,
        body: k.body.clone(),
    }
}
