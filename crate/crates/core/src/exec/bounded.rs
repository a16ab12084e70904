use std::collections::BTreeMap;

use super::engine::{Domain, Thread};
use super::shape::ShapeEnv;
use super::spec::{LiftSpec, SymbolicTensor};
use super::ExecError;
use crate::kernel::{KBinOp, KernelModule, ParamKind};
use crate::scalar::{MathFn, Rational, Scalar};
use crate::sym::{Rel, Term};
use crate::tensor::Tensor;
use crate::value::Value;

/// Flat buffers at a fixed shape, with values in any [`Value`] type.
pub struct Bounded<V: Value> {
    names: Vec<String>,
    ints: BTreeMap<String, i64>,
    reals: BTreeMap<usize, V>,
    buffers: Vec<Option<Vec<Option<V>>>>,
    writers: Vec<Vec<Option<usize>>>,
    current: usize,
}

impl<V: Value> Bounded<V> {
    /// `inputs` supplies contents for every tensor-in parameter (by position) and a
    /// value for every scalar-real parameter.
    pub fn new(
        k: &KernelModule,
        env: &ShapeEnv,
        mut tensor: impl FnMut(usize, usize) -> V,
        mut real: impl FnMut(usize) -> V,
    ) -> Bounded<V> {
        let mut buffers = Vec::new();
        let mut writers = Vec::new();
        let mut reals = BTreeMap::new();
        for (pos, p) in k.params.iter().enumerate() {
            let len = if p.is_tensor() { env.len_of(&p.name) } else { 0 };
            match p.kind {
                ParamKind::TensorIn => buffers.push(Some((0..len).map(|i| Some(tensor(pos, i))).collect())),
                ParamKind::TensorOut => buffers.push(Some(vec![None; len])),
                ParamKind::ScalarReal => {
                    reals.insert(pos, real(pos));
                    buffers.push(None)
                }
                ParamKind::ScalarInt => buffers.push(None),
            }
            writers.push(vec![None; len]);
        }
        Bounded {
            names: k.params.iter().map(|p| p.name.clone()).collect(),
            ints: env.ints.clone(),
            reals,
            buffers,
            writers,
            current: 0,
        }
    }

    fn slot(&self, tensor: usize, addr: i64) -> Result<usize, ExecError> {
        let len = self.buffers[tensor].as_ref().map_or(0, |b| b.len());
        if addr < 0 || addr as usize >= len {
            return Err(ExecError::OutOfBounds { tensor: self.names[tensor].clone(), index: addr, len });
        }
        Ok(addr as usize)
    }

    /// Collected contents of an output buffer; every element must have been written.
    pub fn output(&self, tensor: usize) -> Result<Vec<V>, ExecError> {
        let buf = self.buffers[tensor].as_ref().expect("output buffer");
        buf.iter()
            .enumerate()
            .map(|(i, v)| {
                v.clone().ok_or_else(|| ExecError::NeverWritten { tensor: self.names[tensor].clone(), index: i })
            })
            .collect()
    }
}

impl<V: Value> Domain for Bounded<V> {
    type Int = i64;
    type Val = V;
    type Cond = V::Cond;

    fn int_lit(&mut self, v: i64) -> i64 {
        v
    }
    fn int_param(&mut self, name: &str) -> Result<i64, ExecError> {
        self.ints.get(name).copied().ok_or_else(|| ExecError::Shape(format!("unbound int parameter {}", name)))
    }
    fn int_op(&mut self, op: KBinOp, a: &i64, b: &i64) -> Result<i64, ExecError> {
        Ok(match op {
            KBinOp::Add => a + b,
            KBinOp::Sub => a - b,
            KBinOp::Mul => a * b,
            KBinOp::FloorDiv | KBinOp::Mod | KBinOp::Div if *b == 0 => {
                return Err(ExecError::Domain(crate::scalar::DomainError::DivisionByZero))
            }
            KBinOp::FloorDiv => a.div_euclid(*b),
            KBinOp::Mod => a.rem_euclid(*b),
            KBinOp::Div => return Err(ExecError::Type("integer '/' is real division".into())),
        })
    }
    fn to_val(&mut self, a: &i64) -> Result<V, ExecError> {
        Ok(V::constant(&crate::scalar::int(*a)))
    }
    fn real_lit(&mut self, r: &Rational) -> V {
        V::constant(r)
    }
    fn real_param(&mut self, param: usize, name: &str) -> Result<V, ExecError> {
        self.reals.get(&param).cloned().ok_or_else(|| ExecError::Shape(format!("unbound real parameter {}", name)))
    }
    fn val_op(&mut self, op: KBinOp, a: &V, b: &V) -> Result<V, ExecError> {
        Ok(match op {
            KBinOp::Add => a.add(b),
            KBinOp::Sub => a.sub(b),
            KBinOp::Mul => a.mul(b),
            KBinOp::Div => a.div(b)?,
            KBinOp::FloorDiv | KBinOp::Mod => {
                return Err(ExecError::Type(format!("'{}' needs integer operands", op.symbol())))
            }
        })
    }
    fn val_neg(&mut self, a: &V) -> V {
        a.neg()
    }
    fn val_fn(&mut self, f: MathFn, a: &V) -> Result<V, ExecError> {
        Ok(a.apply(f)?)
    }
    fn val_cmp(&mut self, rel: Rel, a: &V, b: &V) -> V::Cond {
        a.compare(rel, b)
    }
    fn select(&mut self, c: &V::Cond, a: &V, b: &V) -> V {
        V::select(c, a, b)
    }
    fn load(&mut self, tensor: usize, addr: &i64) -> Result<V, ExecError> {
        let i = self.slot(tensor, *addr)?;
        self.buffers[tensor].as_ref().unwrap()[i].clone().ok_or_else(|| {
            ExecError::Type(format!("read of unwritten output element {}[{}]", self.names[tensor], i))
        })
    }
    fn store(&mut self, tensor: usize, addr: &i64, v: V) -> Result<(), ExecError> {
        let i = self.slot(tensor, *addr)?;
        if let Some(first) = self.writers[tensor][i] {
            if first != self.current {
                return Err(ExecError::DoubleWrite {
                    tensor: self.names[tensor].clone(),
                    index: i,
                    first,
                    second: self.current,
                });
            }
        }
        self.writers[tensor][i] = Some(self.current);
        self.buffers[tensor].as_mut().unwrap()[i] = Some(v);
        Ok(())
    }
}

fn run_threads<V: Value>(
    k: &KernelModule,
    env: &ShapeEnv,
    dom: &mut Bounded<V>,
    order: impl IntoIterator<Item = usize>,
) -> Result<(), ExecError> {
    for pid in order {
        dom.current = pid;
        Thread::run(k, dom, pid as i64, env.live)?;
    }
    Ok(())
}

/// Symbolic execution at a fixed shape: every input element is a fresh leaf.
pub fn execute(k: &KernelModule, env: &ShapeEnv) -> Result<LiftSpec, ExecError> {
    execute_in_order(k, env, 0..env.grid)
}

pub fn execute_in_order(
    k: &KernelModule,
    env: &ShapeEnv,
    order: impl IntoIterator<Item = usize>,
) -> Result<LiftSpec, ExecError> {
    let mut dom = Bounded::<Term>::new(
        k,
        env,
        |pos, i| Term::elem(pos as u32, i as u32),
        |pos| Term::elem(pos as u32, 0),
    );
    run_threads(k, env, &mut dom, order)?;
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for (pos, p) in k.params.iter().enumerate() {
        match p.kind {
            ParamKind::TensorIn => {
                let dims = env.dims[&p.name].clone();
                let n = dims.iter().product::<usize>();
                inputs.push(SymbolicTensor {
                    param: pos as u32,
                    name: p.name.clone(),
                    dims,
                    elems: (0..n).map(|i| Term::elem(pos as u32, i as u32)).collect(),
                });
            }
            ParamKind::ScalarReal => inputs.push(SymbolicTensor {
                param: pos as u32,
                name: p.name.clone(),
                dims: vec![],
                elems: vec![Term::elem(pos as u32, 0)],
            }),
            ParamKind::TensorOut => outputs.push(SymbolicTensor {
                param: pos as u32,
                name: p.name.clone(),
                dims: env.dims[&p.name].clone(),
                elems: dom.output(pos)?,
            }),
            ParamKind::ScalarInt => {}
        }
    }
    Ok(LiftSpec {
        kernel: k.name.clone(),
        names: k.params.iter().map(|p| p.name.clone()).collect(),
        inputs,
        outputs,
        block_size: k.block_size,
        live: env.live,
        env: env.clone(),
        real_assumptions: k
            .params
            .iter()
            .enumerate()
            .filter_map(|(pos, p)| p.assume.clone().map(|a| (pos as u32, a)))
            .collect(),
    })
}

/// Concrete inputs by parameter name: tensors for tensor-in params, scalars for real params.
pub struct ConcreteInputs<S> {
    pub tensors: BTreeMap<String, Tensor<S>>,
    pub reals: BTreeMap<String, S>,
}

/// Concrete interpretation over any scalar type. Returns every output by name.
pub fn run_concrete<S: Scalar>(
    k: &KernelModule,
    env: &ShapeEnv,
    inputs: &ConcreteInputs<S>,
) -> Result<BTreeMap<String, Tensor<S>>, ExecError> {
    for (_, p) in k.inputs() {
        let t = inputs
            .tensors
            .get(&p.name)
            .ok_or_else(|| ExecError::Shape(format!("missing input {}", p.name)))?;
        if t.dims != env.dims[&p.name] {
            return Err(ExecError::Shape(format!("input {} has dims {:?}, expected {:?}", p.name, t.dims, env.dims[&p.name])));
        }
    }
    let names: Vec<&str> = k.params.iter().map(|p| p.name.as_str()).collect();
    let mut dom = Bounded::<S>::new(
        k,
        env,
        |pos, i| inputs.tensors[names[pos]].data[i].clone(),
        |pos| inputs.reals.get(names[pos]).cloned().unwrap_or_else(S::one),
    );
    run_threads(k, env, &mut dom, 0..env.grid)?;
    let mut out = BTreeMap::new();
    for (pos, p) in k.outputs() {
        out.insert(p.name.clone(), Tensor::new(env.dims[&p.name].clone(), dom.output(pos)?));
    }
    Ok(out)
}
