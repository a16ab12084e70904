use std::collections::HashMap;
use std::fmt::Debug;

use super::ExecError;
use crate::kernel::{KBinOp, KExpr, KernelModule, ParamKind, RedOp, Stmt};
use crate::scalar::{MathFn, Rational};
use crate::sym::Rel;

/// The semantic domain a kernel thread is interpreted in.
pub trait Domain {
    type Int: Clone + Debug;
    type Val: Clone + Debug;
    type Cond: Clone + Debug;

    fn int_lit(&mut self, v: i64) -> Self::Int;
    fn int_param(&mut self, name: &str) -> Result<Self::Int, ExecError>;
    fn int_op(&mut self, op: KBinOp, a: &Self::Int, b: &Self::Int) -> Result<Self::Int, ExecError>;
    fn to_val(&mut self, a: &Self::Int) -> Result<Self::Val, ExecError>;
    fn real_lit(&mut self, r: &Rational) -> Self::Val;
    fn real_param(&mut self, param: usize, name: &str) -> Result<Self::Val, ExecError>;
    fn val_op(&mut self, op: KBinOp, a: &Self::Val, b: &Self::Val) -> Result<Self::Val, ExecError>;
    fn val_neg(&mut self, a: &Self::Val) -> Self::Val;
    fn val_fn(&mut self, f: MathFn, a: &Self::Val) -> Result<Self::Val, ExecError>;
    fn val_cmp(&mut self, rel: Rel, a: &Self::Val, b: &Self::Val) -> Self::Cond;
    fn select(&mut self, c: &Self::Cond, a: &Self::Val, b: &Self::Val) -> Self::Val;
    fn load(&mut self, tensor: usize, addr: &Self::Int) -> Result<Self::Val, ExecError>;
    fn store(&mut self, tensor: usize, addr: &Self::Int, v: Self::Val) -> Result<(), ExecError>;
}

enum Item<D: Domain> {
    Int(D::Int),
    Val(D::Val),
    Cond(D::Cond),
}

impl<D: Domain> Clone for Item<D> {
    fn clone(&self) -> Self {
        match self {
            Item::Int(x) => Item::Int(x.clone()),
            Item::Val(x) => Item::Val(x.clone()),
            Item::Cond(x) => Item::Cond(x.clone()),
        }
    }
}

/// A kernel-level value: a scalar or a block of lanes (dead lanes are `None`),
/// optionally a pointer into a tensor parameter.
struct KVal<D: Domain> {
    ptr: Option<usize>,
    block: bool,
    lanes: Vec<Option<Item<D>>>,
}

impl<D: Domain> Clone for KVal<D> {
    fn clone(&self) -> Self {
        KVal { ptr: self.ptr, block: self.block, lanes: self.lanes.clone() }
    }
}

impl<D: Domain> KVal<D> {
    fn scalar(item: Item<D>) -> Self {
        KVal { ptr: None, block: false, lanes: vec![Some(item)] }
    }

    fn lane(&self, i: usize) -> Option<&Item<D>> {
        if self.block {
            self.lanes[i].as_ref()
        } else {
            self.lanes[0].as_ref()
        }
    }
}

/// Interprets one thread (one `program_id`) of `k` in domain `dom`.
pub struct Thread<'k, D: Domain> {
    k: &'k KernelModule,
    live: usize,
    pid: D::Int,
    locals: HashMap<&'k str, KVal<D>>,
}

impl<'k, D: Domain> Thread<'k, D> {
    pub fn run(k: &'k KernelModule, dom: &mut D, pid: D::Int, live: usize) -> Result<(), ExecError> {
        let mut t = Thread { k, live, pid, locals: HashMap::new() };
        for stmt in &k.body {
            match stmt {
                Stmt::Assign(name, e) => {
                    let v = t.eval(dom, e)?;
                    t.locals.insert(name.as_str(), v);
                }
                Stmt::Store(addr, value) => {
                    let a = t.eval(dom, addr)?;
                    let v = t.eval(dom, value)?;
                    t.store(dom, a, v)?;
                }
            }
        }
        Ok(())
    }

    fn block(&self) -> usize {
        self.k.block_size as usize
    }

    fn eval(&mut self, dom: &mut D, e: &'k KExpr) -> Result<KVal<D>, ExecError> {
        Ok(match e {
            KExpr::Var(name) => {
                if let Some(v) = self.locals.get(name.as_str()) {
                    return Ok(v.clone());
                }
                let (pos, p) = self
                    .k
                    .param(name)
                    .ok_or_else(|| ExecError::Type(format!("unknown identifier {}", name)))?;
                match p.kind {
                    ParamKind::TensorIn | ParamKind::TensorOut => {
                        let mut v = KVal::scalar(Item::Int(dom.int_lit(0)));
                        v.ptr = Some(pos);
                        v
                    }
                    ParamKind::ScalarInt => KVal::scalar(Item::Int(dom.int_param(name)?)),
                    ParamKind::ScalarReal => KVal::scalar(Item::Val(dom.real_param(pos, name)?)),
                }
            }
            KExpr::ProgramId => KVal::scalar(Item::Int(self.pid.clone())),
            KExpr::BlockSize => KVal::scalar(Item::Int(dom.int_lit(self.block() as i64))),
            KExpr::Int(v) => KVal::scalar(Item::Int(dom.int_lit(*v))),
            KExpr::Real(r) => KVal::scalar(Item::Val(dom.real_lit(r))),
            KExpr::Arange(lo, hi) => {
                let b = self.block() as i64;
                let lo = lo.const_int(b).ok_or_else(|| ExecError::Type("non-constant arange bounds".into()))?;
                let hi = hi.const_int(b).ok_or_else(|| ExecError::Type("non-constant arange bounds".into()))?;
                if hi - lo != b {
                    return Err(ExecError::Type("arange length differs from block size".into()));
                }
                let lanes = (0..self.block())
                    .map(|i| (i < self.live).then(|| Item::Int(dom.int_lit(lo + i as i64))))
                    .collect();
                KVal { ptr: None, block: true, lanes }
            }
            KExpr::Load(addr) => {
                let a = self.eval(dom, addr)?;
                let tensor = a.ptr.ok_or_else(|| ExecError::Type("load from a non-pointer".into()))?;
                let mut lanes = Vec::with_capacity(a.lanes.len());
                for lane in &a.lanes {
                    lanes.push(match lane {
                        Some(Item::Int(i)) => Some(Item::Val(dom.load(tensor, i)?)),
                        None => None,
                        Some(_) => return Err(ExecError::Type("pointer offset is not an integer".into())),
                    });
                }
                KVal { ptr: None, block: a.block, lanes }
            }
            KExpr::Bin(op, a, b) => {
                let (a, b) = (self.eval(dom, a)?, self.eval(dom, b)?);
                let ptr = match (a.ptr, b.ptr, op) {
                    (None, None, _) => None,
                    (Some(p), None, KBinOp::Add | KBinOp::Sub) | (None, Some(p), KBinOp::Add) => Some(p),
                    _ => return Err(ExecError::Type(format!("invalid pointer arithmetic with '{}'", op.symbol()))),
                };
                let mut out = self.zip(dom, &a, &b, |dom, x, y| bin_item(dom, *op, x, y))?;
                out.ptr = ptr;
                out
            }
            KExpr::Neg(a) => {
                let a = self.eval(dom, a)?;
                self.map(dom, &a, |dom, x| match x {
                    Item::Int(i) => {
                        let zero = dom.int_lit(0);
                        Ok(Item::Int(dom.int_op(KBinOp::Sub, &zero, i)?))
                    }
                    Item::Val(v) => Ok(Item::Val(dom.val_neg(v))),
                    Item::Cond(_) => Err(ExecError::Type("negation of a comparison".into())),
                })?
            }
            KExpr::Math(f, a) => {
                let a = self.eval(dom, a)?;
                self.map(dom, &a, |dom, x| {
                    let v = as_val(dom, x)?;
                    Ok(Item::Val(dom.val_fn(*f, &v)?))
                })?
            }
            KExpr::Cmp(rel, a, b) => {
                let (a, b) = (self.eval(dom, a)?, self.eval(dom, b)?);
                self.zip(dom, &a, &b, |dom, x, y| {
                    let (x, y) = (as_val(dom, x)?, as_val(dom, y)?);
                    Ok(Item::Cond(dom.val_cmp(*rel, &x, &y)))
                })?
            }
            KExpr::Where(c, a, b) => {
                let (c, a, b) = (self.eval(dom, c)?, self.eval(dom, a)?, self.eval(dom, b)?);
                let block = c.block || a.block || b.block;
                let n = if block { self.block() } else { 1 };
                let mut lanes = Vec::with_capacity(n);
                for i in 0..n {
                    lanes.push(match (c.lane(i), a.lane(i), b.lane(i)) {
                        (Some(Item::Cond(c)), Some(x), Some(y)) => {
                            let (x, y) = (as_val(dom, x)?, as_val(dom, y)?);
                            Some(Item::Val(dom.select(c, &x, &y)))
                        }
                        (Some(_), Some(_), Some(_)) => {
                            return Err(ExecError::Type("where() condition must be a comparison".into()))
                        }
                        _ => None,
                    });
                }
                KVal { ptr: None, block, lanes }
            }
            KExpr::Reduce(op, a) => {
                let a = self.eval(dom, a)?;
                if !a.block {
                    return Err(ExecError::Type(format!("{} expects a block operand", op.name())));
                }
                let mut vals = Vec::new();
                for lane in a.lanes.iter().flatten() {
                    vals.push(as_val(dom, lane)?);
                }
                let result = match op {
                    RedOp::Sum => {
                        let mut it = vals.into_iter();
                        let first = it.next().ok_or_else(|| ExecError::Type("reduction over no live lanes".into()))?;
                        let mut acc = first;
                        for v in it {
                            acc = dom.val_op(KBinOp::Add, &acc, &v)?;
                        }
                        acc
                    }
                    RedOp::Max => {
                        let mut it = vals.into_iter().rev();
                        let last = it.next().ok_or_else(|| ExecError::Type("reduction over no live lanes".into()))?;
                        let mut acc = last;
                        for v in it {
                            let c = dom.val_cmp(Rel::Gt, &v, &acc);
                            acc = dom.select(&c, &v, &acc);
                        }
                        acc
                    }
                };
                KVal::scalar(Item::Val(result))
            }
        })
    }

    fn map(
        &self,
        dom: &mut D,
        a: &KVal<D>,
        mut f: impl FnMut(&mut D, &Item<D>) -> Result<Item<D>, ExecError>,
    ) -> Result<KVal<D>, ExecError> {
        if a.ptr.is_some() {
            return Err(ExecError::Type("arithmetic on a pointer".into()));
        }
        let mut lanes = Vec::with_capacity(a.lanes.len());
        for lane in &a.lanes {
            lanes.push(match lane {
                Some(x) => Some(f(dom, x)?),
                None => None,
            });
        }
        Ok(KVal { ptr: None, block: a.block, lanes })
    }

    fn zip(
        &self,
        dom: &mut D,
        a: &KVal<D>,
        b: &KVal<D>,
        mut f: impl FnMut(&mut D, &Item<D>, &Item<D>) -> Result<Item<D>, ExecError>,
    ) -> Result<KVal<D>, ExecError> {
        let block = a.block || b.block;
        let n = if block { self.block() } else { 1 };
        let mut lanes = Vec::with_capacity(n);
        for i in 0..n {
            lanes.push(match (a.lane(i), b.lane(i)) {
                (Some(x), Some(y)) => Some(f(dom, x, y)?),
                _ => None,
            });
        }
        Ok(KVal { ptr: None, block, lanes })
    }

    fn store(&mut self, dom: &mut D, addr: KVal<D>, value: KVal<D>) -> Result<(), ExecError> {
        let tensor = addr.ptr.ok_or_else(|| ExecError::Type("store to a non-pointer".into()))?;
        if self.k.params[tensor].kind != ParamKind::TensorOut {
            return Err(ExecError::Type(format!(
                "store to {} which is not a tensor-out parameter",
                self.k.params[tensor].name
            )));
        }
        if value.ptr.is_some() {
            return Err(ExecError::Type("cannot store a pointer".into()));
        }
        if value.block && !addr.block {
            return Err(ExecError::Type("storing a block through a scalar pointer".into()));
        }
        for i in 0..addr.lanes.len() {
            let Some(a) = addr.lane(i) else { continue };
            let Item::Int(a) = a else {
                return Err(ExecError::Type("pointer offset is not an integer".into()));
            };
            let v = match value.lane(i) {
                Some(v) => as_val(dom, v)?,
                None => return Err(ExecError::Type("storing a dead lane".into())),
            };
            dom.store(tensor, a, v)?;
        }
        Ok(())
    }
}

fn as_val<D: Domain>(dom: &mut D, x: &Item<D>) -> Result<D::Val, ExecError> {
    match x {
        Item::Int(i) => dom.to_val(i),
        Item::Val(v) => Ok(v.clone()),
        Item::Cond(_) => Err(ExecError::Type("comparison used as a value".into())),
    }
}

fn bin_item<D: Domain>(dom: &mut D, op: KBinOp, x: &Item<D>, y: &Item<D>) -> Result<Item<D>, ExecError> {
    match (x, y) {
        (Item::Int(a), Item::Int(b)) if op != KBinOp::Div => Ok(Item::Int(dom.int_op(op, a, b)?)),
        (Item::Cond(_), _) | (_, Item::Cond(_)) => Err(ExecError::Type("arithmetic on a comparison".into())),
        _ => {
            if matches!(op, KBinOp::FloorDiv | KBinOp::Mod) {
                return Err(ExecError::Type(format!("'{}' needs integer operands", op.symbol())));
            }
            let (a, b) = (as_val(dom, x)?, as_val(dom, y)?);
            Ok(Item::Val(dom.val_op(op, &a, &b)?))
        }
    }
}
