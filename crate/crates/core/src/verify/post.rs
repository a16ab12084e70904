use std::collections::BTreeMap;

use num_traits::FromPrimitive;

use super::lin::Lin;
use super::model::{Atoms, SymShape};
use crate::formula::{infer_shape, BinOp, Formula, RedOp};
use crate::scalar::Rational;
use crate::sym::{Rel, Term};
use crate::value::Value;

/// Pointwise evaluation of a formula at a symbolic multi-index, with input elements
/// interned as address atoms.
pub struct Pointwise<'a> {
    pub shape: &'a SymShape,
    /// Parameter position of every formula input.
    pub params: &'a BTreeMap<String, u32>,
    pub atoms: &'a mut Atoms,
}

impl Pointwise<'_> {
    fn dims(&self, f: &Formula, next: bool) -> Result<Vec<usize>, String> {
        let env = if next { &self.shape.env_next } else { &self.shape.env };
        infer_shape(f, &|n| env.dims.get(n).cloned().or_else(|| self.params.contains_key(n).then(Vec::new)))
            .map_err(|e| e.to_string())
    }

    /// A reduced or contracted axis must not depend on the grid.
    fn fixed_dim(&self, f: &Formula, axis: usize) -> Result<usize, String> {
        let (d0, d1) = (self.dims(f, false)?, self.dims(f, true)?);
        if d0[axis] != d1[axis] {
            return Err(format!("axis {} of {} grows with the grid", axis, f));
        }
        Ok(d0[axis])
    }

    /// Index into an operand broadcast against a result of rank `rank`.
    fn align(&self, f: &Formula, idx: &[Lin]) -> Result<Vec<Lin>, String> {
        let d = self.dims(f, false)?;
        let off = idx.len() - d.len();
        Ok(d.iter().enumerate().map(|(j, n)| if *n == 1 { Lin::constant(0) } else { idx[off + j].clone() }).collect())
    }

    pub fn at(&mut self, f: &Formula, idx: &[Lin]) -> Result<Term, String> {
        Ok(match f {
            Formula::Input(n) => {
                let pos = *self.params.get(n).ok_or_else(|| format!("unknown input {}", n))?;
                let Some(dims) = self.shape.dims.get(n) else {
                    return Ok(self.atoms.get(pos, Lin::constant(0)));
                };
                let nonlinear = || format!("non-linear address into {}", n);
                let mut addr = Lin::constant(0);
                let mut stride = Some(Lin::constant(1));
                for j in (0..dims.len()).rev() {
                    let s = stride.as_ref().ok_or_else(nonlinear)?;
                    addr = addr.add(&idx[j].mul(s).ok_or_else(nonlinear)?);
                    stride = s.mul(&dims[j]);
                }
                self.atoms.get(pos, addr)
            }
            Formula::Const(c) => Term::constant(c.clone()),
            Formula::Named(c) => Term::constant(Rational::from_f64(c.value()).expect("finite constant")),
            Formula::Neg(a) => {
                let i = self.align(a, idx)?;
                Value::neg(&self.at(a, &i)?)
            }
            Formula::Fn(g, a) => {
                let i = self.align(a, idx)?;
                Value::apply(&self.at(a, &i)?, *g).map_err(|e| e.to_string())?
            }
            Formula::Bin(op, a, b) => {
                let (ia, ib) = (self.align(a, idx)?, self.align(b, idx)?);
                let (x, y) = (self.at(a, &ia)?, self.at(b, &ib)?);
                match op {
                    BinOp::Add => Value::add(&x, &y),
                    BinOp::Sub => Value::sub(&x, &y),
                    BinOp::Mul => Value::mul(&x, &y),
                    BinOp::Div => Value::div(&x, &y).map_err(|e| e.to_string())?,
                }
            }
            Formula::Reduce(op, a) => {
                let last = self.dims(a, false)?.len() - 1;
                let n = self.fixed_dim(a, last)?;
                let mut row = Vec::with_capacity(n);
                for j in 0..n {
                    let mut i = self.align(a, idx)?;
                    i[last] = Lin::constant(j as i64);
                    row.push(self.at(a, &i)?);
                }
                match op {
                    RedOp::Sum => row[1..].iter().fold(row[0].clone(), |acc, v| Value::add(&acc, v)),
                    RedOp::Max => {
                        let mut acc = row[n - 1].clone();
                        for v in row[..n - 1].iter().rev() {
                            acc = Value::max(&v, &acc);
                        }
                        acc
                    }
                }
            }
            Formula::Permute(a) => self.at(a, &[idx[1].clone(), idx[0].clone()])?,
            Formula::MatMul(a, b) => {
                let inner = self.fixed_dim(a, 1)?;
                let mut acc: Option<Term> = None;
                for k in 0..inner {
                    let kk = Lin::constant(k as i64);
                    let x = self.at(a, &[idx[0].clone(), kk.clone()])?;
                    let y = self.at(b, &[kk, idx[1].clone()])?;
                    let t = Value::mul(&x, &y);
                    acc = Some(match acc {
                        None => t,
                        Some(s) => Value::add(&s, &t),
                    });
                }
                acc.ok_or("empty contraction")?
            }
            Formula::IfPos(c, a, b) => {
                let (ic, ia, ib) = (self.align(c, idx)?, self.align(a, idx)?, self.align(b, idx)?);
                let cond = self.at(c, &ic)?.compare(Rel::Gt, &Term::zero());
                <Term as Value>::select(&cond, &self.at(a, &ia)?, &self.at(b, &ib)?)
            }
        })
    }

    /// Pointwise value at flat output index `flat` of an output with dims `dims`.
    pub fn at_flat(&mut self, f: &Formula, flat: &Lin, dims: &[Lin]) -> Result<Term, String> {
        let idx = unravel(flat, dims)?;
        let rank = self.dims(f, false)?.len();
        if rank > idx.len() {
            return Err("formula rank exceeds output rank".into());
        }
        let i = self.align(f, &idx)?;
        self.at(f, &i)
    }
}

/// Row-major multi-index of a flat index; every dim after the first must be constant.
pub fn unravel(flat: &Lin, dims: &[Lin]) -> Result<Vec<Lin>, String> {
    let mut idx = vec![Lin::constant(0); dims.len()];
    let mut stride = 1i64;
    for j in (0..dims.len()).rev() {
        let q = flat.floordiv(stride);
        idx[j] = if j == 0 {
            q
        } else {
            let d = dims[j].as_const().ok_or("inner output dims must not depend on the grid")?;
            stride *= d;
            q.modulo(d)
        };
    }
    Ok(idx)
}
