use std::collections::BTreeMap;

use serde::Serialize;

use super::bounded::execute;
use super::ExecError;
use crate::kernel::KernelModule;

/// A concrete shape binding for a kernel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShapeEnv {
    /// Every scalar-int parameter, free and defined.
    pub ints: BTreeMap<String, i64>,
    /// Dimensions of every tensor parameter.
    pub dims: BTreeMap<String, Vec<usize>>,
    pub grid: usize,
    /// Live lanes per block.
    pub live: usize,
}

impl ShapeEnv {
    /// Binds the free int parameters and derives everything else.
    pub fn bind(k: &KernelModule, free: &BTreeMap<String, i64>) -> Result<ShapeEnv, ExecError> {
        for name in k.free_int_params() {
            if !free.contains_key(name) {
                return Err(ExecError::Shape(format!("no value for int parameter {}", name)));
            }
        }
        let ints = k.resolve_ints(free).map_err(ExecError::Shape)?;
        let block = k.block_size as i64;
        let mut dims = BTreeMap::new();
        for p in k.params.iter().filter(|p| p.is_tensor()) {
            let mut d = Vec::new();
            for e in &p.dims {
                let v = e.eval(&ints, block).map_err(ExecError::Shape)?;
                if v < 1 {
                    return Err(ExecError::Shape(format!("dimension of {} evaluates to {}", p.name, v)));
                }
                d.push(v as usize);
            }
            dims.insert(p.name.clone(), d);
        }
        let grid = k.grid_expr.eval(&ints, block).map_err(ExecError::Shape)?;
        if grid < 1 {
            return Err(ExecError::Shape(format!("grid evaluates to {}", grid)));
        }
        let live = match &k.live {
            Some(e) => e.eval(&ints, block).map_err(ExecError::Shape)?,
            None => block,
        };
        if live < 1 || live > block {
            return Err(ExecError::Shape(format!("live length {} outside 1..={}", live, block)));
        }
        Ok(ShapeEnv { ints, dims, grid: grid as usize, live: live as usize })
    }

    pub fn len_of(&self, tensor: &str) -> usize {
        self.dims.get(tensor).map_or(0, |d| d.iter().product())
    }

    fn input_elements(&self, k: &KernelModule) -> usize {
        k.inputs().map(|(_, p)| self.len_of(&p.name)).sum()
    }
}

const MAX_FREE_VALUE: i64 = 16;

/// The smallest binding with at least two threads and full blocks.
///
/// Candidates are ordered by total input elements, then by the free values in
/// parameter order; the first that symbolically executes cleanly wins. A kernel
/// whose grid is a constant keeps that grid.
pub fn default_shape(k: &KernelModule) -> Result<ShapeEnv, ExecError> {
    let free: Vec<&str> = k.free_int_params();
    let mut candidates = Vec::new();
    let mut values = vec![1i64; free.len()];
    loop {
        let binding: BTreeMap<String, i64> =
            free.iter().map(|s| s.to_string()).zip(values.iter().copied()).collect();
        if let Ok(env) = ShapeEnv::bind(k, &binding) {
            let threads_ok = env.grid >= 2 || k.grid_expr.is_constant();
            if threads_ok && env.live == k.block_size as usize {
                candidates.push((env.input_elements(k), values.clone(), env));
            }
        }
        // odometer over 1..=MAX_FREE_VALUE
        let mut i = 0;
        loop {
            if i == values.len() {
                return pick(k, candidates);
            }
            values[i] += 1;
            if values[i] <= MAX_FREE_VALUE {
                break;
            }
            values[i] = 1;
            i += 1;
        }
    }
}

fn pick(k: &KernelModule, mut candidates: Vec<(usize, Vec<i64>, ShapeEnv)>) -> Result<ShapeEnv, ExecError> {
    candidates.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut first_err = None;
    for (_, _, env) in candidates {
        match execute(k, &env) {
            Ok(_) => return Ok(env),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.unwrap_or_else(|| {
        ExecError::Shape(format!("no shape with free parameters in 1..={} gives >= 2 full-block threads", MAX_FREE_VALUE))
    }))
}
