use num_traits::FromPrimitive;
use thiserror::Error;

use super::shape::{infer_shape, ShapeError};
use super::{BinOp, Formula, RedOp};
use crate::scalar::{DomainError, Rational};
use crate::sym::Rel;
use crate::tensor::{broadcast, unravel, Tensor};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Evaluates `f` over any value algebra. Row sums fold left to right and row
/// maxima nest to the right, matching the kernel reductions.
pub fn eval<V: Value>(f: &Formula, inputs: &dyn Fn(&str) -> Option<Tensor<V>>) -> Result<Tensor<V>, FormulaError> {
    Ok(match f {
        Formula::Input(n) => inputs(n).ok_or_else(|| ShapeError::UnknownInput(n.clone()))?,
        Formula::Const(c) => Tensor::scalar(V::constant(c)),
        Formula::Named(c) => {
            let r = Rational::from_f64(c.value()).expect("finite constant");
            Tensor::scalar(V::constant(&r))
        }
        Formula::Neg(a) => eval(a, inputs)?.map(|v| v.neg()),
        Formula::Fn(g, a) => eval(a, inputs)?.try_map(|v| v.apply(*g))?,
        Formula::Bin(op, a, b) => {
            let (ta, tb) = (eval(a, inputs)?, eval(b, inputs)?);
            zip(&ta, &tb, op.symbol(), |x, y| match op {
                BinOp::Add => Ok(x.add(y)),
                BinOp::Sub => Ok(x.sub(y)),
                BinOp::Mul => Ok(x.mul(y)),
                BinOp::Div => x.div(y),
            })?
        }
        Formula::Reduce(op, a) => {
            let t = eval(a, inputs)?;
            let Some(&n) = t.dims.last() else { return Err(ShapeError::ReduceScalar.into()) };
            let mut dims = t.dims.clone();
            *dims.last_mut().unwrap() = 1;
            let rows: Vec<V> = t
                .data
                .chunks(n.max(1))
                .map(|row| match op {
                    RedOp::Sum => row[1..].iter().fold(row[0].clone(), |acc, v| acc.add(v)),
                    RedOp::Max => {
                        let mut acc = row[n - 1].clone();
                        for v in row[..n - 1].iter().rev() {
                            acc = v.max(&acc);
                        }
                        acc
                    }
                })
                .collect();
            Tensor::new(dims, rows)
        }
        Formula::Permute(a) => {
            let t = eval(a, inputs)?;
            if t.dims.len() != 2 {
                return Err(ShapeError::Rank("transpose", t.dims).into());
            }
            let (r, c) = (t.dims[0], t.dims[1]);
            Tensor::from_fn(vec![c, r], |i| t.data[(i % r) * c + i / r].clone())
        }
        Formula::MatMul(a, b) => {
            let (ta, tb) = (eval(a, inputs)?, eval(b, inputs)?);
            let dims = infer_shape(
                &Formula::MatMul(Formula::input("a"), Formula::input("b")),
                &|n| Some(if n == "a" { ta.dims.clone() } else { tb.dims.clone() }),
            )?;
            let (inner, cols) = (ta.dims[1], tb.dims[1]);
            Tensor::from_fn(dims, |i| {
                let (r, c) = (i / cols, i % cols);
                let term = |k: usize| ta.data[r * inner + k].mul(&tb.data[k * cols + c]);
                (1..inner).fold(term(0), |acc, k| acc.add(&term(k)))
            })
        }
        Formula::IfPos(c, a, b) => {
            let (tc, ta, tb) = (eval(c, inputs)?, eval(a, inputs)?, eval(b, inputs)?);
            let zero = V::constant(&Rational::from_integer(0.into()));
            let ab_dims = broadcast(&ta.dims, &tb.dims)
                .ok_or_else(|| ShapeError::Broadcast(ta.dims.clone(), tb.dims.clone(), "ifpos"))?;
            let dims = broadcast(&tc.dims, &ab_dims)
                .ok_or_else(|| ShapeError::Broadcast(tc.dims.clone(), ab_dims.clone(), "ifpos"))?;
            Tensor::from_fn(dims.clone(), |i| {
                let idx = unravel(i, &dims);
                let cond = tc.get_broadcast(&idx).compare(Rel::Gt, &zero);
                V::select(&cond, ta.get_broadcast(&idx), tb.get_broadcast(&idx))
            })
        }
    })
}

fn zip<V: Value>(
    a: &Tensor<V>,
    b: &Tensor<V>,
    sym: &'static str,
    f: impl Fn(&V, &V) -> Result<V, DomainError>,
) -> Result<Tensor<V>, FormulaError> {
    let dims = broadcast(&a.dims, &b.dims).ok_or_else(|| ShapeError::Broadcast(a.dims.clone(), b.dims.clone(), sym))?;
    let n = dims.iter().product();
    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        let idx = unravel(i, &dims);
        data.push(f(a.get_broadcast(&idx), b.get_broadcast(&idx))?);
    }
    Ok(Tensor::new(dims, data))
}
