use thiserror::Error;

use super::{BinOp, Formula};
use crate::tensor::broadcast;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("unknown input {0}")]
    UnknownInput(String),
    #[error("shapes {0:?} and {1:?} do not broadcast under '{2}'")]
    Broadcast(Vec<usize>, Vec<usize>, &'static str),
    #[error("{0} expects a 2-D operand, got {1:?}")]
    Rank(&'static str, Vec<usize>),
    #[error("reduction of a 0-d tensor")]
    ReduceScalar,
    #[error("second dimension of a does not match first dimension of b")]
    MatMulInner,
}

/// Output dims of `f` given input dims.
pub fn infer_shape(f: &Formula, inputs: &dyn Fn(&str) -> Option<Vec<usize>>) -> Result<Vec<usize>, ShapeError> {
    Ok(match f {
        Formula::Input(n) => inputs(n).ok_or_else(|| ShapeError::UnknownInput(n.clone()))?,
        Formula::Const(_) | Formula::Named(_) => vec![],
        Formula::Neg(a) | Formula::Fn(_, a) => infer_shape(a, inputs)?,
        Formula::Bin(op, a, b) => {
            let (da, db) = (infer_shape(a, inputs)?, infer_shape(b, inputs)?);
            broadcast(&da, &db).ok_or_else(|| ShapeError::Broadcast(da, db, op_symbol(*op)))?
        }
        Formula::Reduce(_, a) => {
            let mut d = infer_shape(a, inputs)?;
            match d.last_mut() {
                Some(last) => *last = 1,
                None => return Err(ShapeError::ReduceScalar),
            }
            d
        }
        Formula::Permute(a) => {
            let d = infer_shape(a, inputs)?;
            if d.len() != 2 {
                return Err(ShapeError::Rank("transpose", d));
            }
            vec![d[1], d[0]]
        }
        Formula::MatMul(a, b) => {
            let (da, db) = (infer_shape(a, inputs)?, infer_shape(b, inputs)?);
            if da.len() != 2 {
                return Err(ShapeError::Rank("matmul", da));
            }
            if db.len() != 2 {
                return Err(ShapeError::Rank("matmul", db));
            }
            if da[1] != db[0] {
                return Err(ShapeError::MatMulInner);
            }
            vec![da[0], db[1]]
        }
        Formula::IfPos(c, a, b) => {
            let dc = infer_shape(c, inputs)?;
            let (da, db) = (infer_shape(a, inputs)?, infer_shape(b, inputs)?);
            let ab = broadcast(&da, &db).ok_or_else(|| ShapeError::Broadcast(da, db, "ifpos"))?;
            broadcast(&dc, &ab).ok_or_else(|| ShapeError::Broadcast(dc, ab, "ifpos"))?
        }
    })
}

fn op_symbol(op: BinOp) -> &'static str {
    op.symbol()
}
