use std::collections::{BTreeMap, HashMap};

use super::lin::Lin;
use crate::exec::{Domain, ExecError, ShapeEnv, Thread};
use crate::kernel::{KBinOp, KernelModule, SizeExpr};
use crate::scalar::{MathFn, Rational};
use crate::sym::{Elem, Rel, Term};
use crate::value::Value;

/// How the launch grid depends on the free size parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GridMap {
    /// Grid `G` with the free parameter `param = scale·G`.
    Linear { param: String, scale: i64 },
    Constant(i64),
}

/// Sizes as linear functions of the symbolic grid `G`; every other free parameter
/// keeps its value from the reference binding.
#[derive(Debug, Clone)]
pub struct SymShape {
    pub grid: GridMap,
    pub ints: BTreeMap<String, Lin>,
    pub dims: BTreeMap<String, Vec<Lin>>,
    pub env: ShapeEnv,
    /// Reference binding at grid + 1, to tell grid-dependent dims apart.
    pub env_next: ShapeEnv,
}

fn grid_map(k: &KernelModule) -> Result<GridMap, String> {
    let free = k.free_int_params();
    let block = k.block_size as i64;
    let param = |p: &String| {
        if free.contains(&p.as_str()) {
            Ok(p.clone())
        } else {
            Err(format!("grid parameter {} is not a free size parameter", p))
        }
    };
    match &k.grid_expr {
        SizeExpr::Lit(v) => Ok(GridMap::Constant(*v)),
        SizeExpr::Param(p) => Ok(GridMap::Linear { param: param(p)?, scale: 1 }),
        SizeExpr::Div(a, b) => match (&**a, &**b) {
            (SizeExpr::Param(p), SizeExpr::Lit(c)) => Ok(GridMap::Linear { param: param(p)?, scale: *c }),
            (SizeExpr::Param(p), SizeExpr::Block) => Ok(GridMap::Linear { param: param(p)?, scale: block }),
            _ => Err("grid must be a parameter or a parameter divided by a constant".into()),
        },
        _ => Err("grid must be a parameter or a parameter divided by a constant".into()),
    }
}

impl SymShape {
    pub fn new(k: &KernelModule, env: &ShapeEnv) -> Result<SymShape, String> {
        let grid = grid_map(k)?;
        let GridMap::Linear { param, scale } = &grid else {
            let ints = env.ints.iter().map(|(n, v)| (n.clone(), Lin::constant(*v))).collect();
            let dims = env
                .dims
                .iter()
                .map(|(n, d)| (n.clone(), d.iter().map(|v| Lin::constant(*v as i64)).collect()))
                .collect();
            return Ok(SymShape { grid, ints, dims, env: env.clone(), env_next: env.clone() });
        };
        let g0 = env.grid as i64;
        let at = |g: i64| {
            let mut free: BTreeMap<String, i64> =
                k.free_int_params().iter().map(|p| (p.to_string(), env.ints[*p])).collect();
            free.insert(param.clone(), scale * g);
            ShapeEnv::bind(k, &free).map_err(|e| e.to_string())
        };
        let (e1, e2) = (at(g0 + 1)?, at(g0 + 2)?);
        let check = |v0: i64, v1: i64, v2: i64, what: &str| {
            if v2 - v1 != v1 - v0 {
                Err(format!("{} is not linear in the grid", what))
            } else {
                Ok(Lin::fit(v0, v1, g0))
            }
        };
        let mut ints = BTreeMap::new();
        for (n, v) in &env.ints {
            ints.insert(n.clone(), check(*v, e1.ints[n], e2.ints[n], n)?);
        }
        let mut dims = BTreeMap::new();
        for (n, d) in &env.dims {
            let mut out = Vec::new();
            for (j, v) in d.iter().enumerate() {
                out.push(check(*v as i64, e1.dims[n][j] as i64, e2.dims[n][j] as i64, n)?);
            }
            dims.insert(n.clone(), out);
        }
        Ok(SymShape { grid, ints, dims, env: env.clone(), env_next: e1 })
    }

    /// Free parameter binding that launches `grid` threads.
    pub fn binding_for_grid(&self, k: &KernelModule, grid: i64) -> BTreeMap<String, i64> {
        let mut free: BTreeMap<String, i64> =
            k.free_int_params().iter().map(|p| (p.to_string(), self.env.ints[*p])).collect();
        if let GridMap::Linear { param, scale } = &self.grid {
            free.insert(param.clone(), scale * grid);
        }
        free
    }

    pub fn len(&self, tensor: &str) -> Result<Lin, String> {
        let d = &self.dims[tensor];
        let mut acc = Lin::constant(1);
        for x in d {
            acc = acc.mul(x).ok_or_else(|| format!("length of {} is not linear", tensor))?;
        }
        Ok(acc)
    }
}

/// Input-element atoms: a tensor parameter and a symbolic address. Terms refer to
/// atom `n` of parameter `p` as `Elem { tensor: p, index: n }`.
#[derive(Debug, Clone, Default)]
pub struct Atoms {
    list: Vec<(u32, Lin)>,
    map: HashMap<(u32, Lin), u32>,
}

impl Atoms {
    pub fn get(&mut self, tensor: u32, addr: Lin) -> Term {
        let key = (tensor, addr);
        let id = match self.map.get(&key) {
            Some(id) => *id,
            None => {
                let id = self.list.len() as u32;
                self.list.push(key.clone());
                self.map.insert(key, id);
                id
            }
        };
        Term::elem(tensor, id)
    }

    pub fn lookup(&self, e: Elem) -> &(u32, Lin) {
        &self.list[e.index as usize]
    }
}

/// One store performed by a thread.
#[derive(Debug, Clone)]
pub struct Store {
    pub tensor: usize,
    pub addr: Lin,
    pub value: Term,
}

/// Symbolic one-iteration transition: `pid` and sizes are symbolic, loads become atoms.
pub struct Transition<'a> {
    pub shape: &'a SymShape,
    pub atoms: &'a mut Atoms,
    pub stores: Vec<Store>,
}

fn unsupported(what: &str) -> ExecError {
    ExecError::Type(format!("unsupported in symbolic transition: {}", what))
}

impl Domain for Transition<'_> {
    type Int = Lin;
    type Val = Term;
    type Cond = Term;

    fn int_lit(&mut self, v: i64) -> Lin {
        Lin::constant(v)
    }
    fn int_param(&mut self, name: &str) -> Result<Lin, ExecError> {
        self.shape.ints.get(name).cloned().ok_or_else(|| ExecError::Shape(format!("unbound int parameter {}", name)))
    }
    fn int_op(&mut self, op: KBinOp, a: &Lin, b: &Lin) -> Result<Lin, ExecError> {
        Ok(match op {
            KBinOp::Add => a.add(b),
            KBinOp::Sub => a.sub(b),
            KBinOp::Mul => a.mul(b).ok_or_else(|| unsupported("non-linear index"))?,
            KBinOp::FloorDiv | KBinOp::Mod => match b.as_const() {
                Some(d) if d > 0 => {
                    if op == KBinOp::FloorDiv {
                        a.floordiv(d)
                    } else {
                        a.modulo(d)
                    }
                }
                _ => return Err(unsupported("division by a non-constant")),
            },
            KBinOp::Div => return Err(ExecError::Type("integer '/' is real division".into())),
        })
    }
    fn to_val(&mut self, a: &Lin) -> Result<Term, ExecError> {
        a.as_const().map(Term::int).ok_or_else(|| unsupported("symbolic index used as a value"))
    }
    fn real_lit(&mut self, r: &Rational) -> Term {
        Term::constant(r.clone())
    }
    fn real_param(&mut self, param: usize, _name: &str) -> Result<Term, ExecError> {
        Ok(self.atoms.get(param as u32, Lin::constant(0)))
    }
    fn val_op(&mut self, op: KBinOp, a: &Term, b: &Term) -> Result<Term, ExecError> {
        Ok(match op {
            KBinOp::Add => Value::add(a, b),
            KBinOp::Sub => Value::sub(a, b),
            KBinOp::Mul => Value::mul(a, b),
            KBinOp::Div => Value::div(a, b)?,
            KBinOp::FloorDiv | KBinOp::Mod => {
                return Err(ExecError::Type(format!("'{}' needs integer operands", op.symbol())))
            }
        })
    }
    fn val_neg(&mut self, a: &Term) -> Term {
        Value::neg(a)
    }
    fn val_fn(&mut self, f: MathFn, a: &Term) -> Result<Term, ExecError> {
        Ok(Value::apply(a, f)?)
    }
    fn val_cmp(&mut self, rel: Rel, a: &Term, b: &Term) -> Term {
        a.compare(rel, b)
    }
    fn select(&mut self, c: &Term, a: &Term, b: &Term) -> Term {
        <Term as Value>::select(c, a, b)
    }
    fn load(&mut self, tensor: usize, addr: &Lin) -> Result<Term, ExecError> {
        Ok(self.atoms.get(tensor as u32, addr.clone()))
    }
    fn store(&mut self, tensor: usize, addr: &Lin, v: Term) -> Result<(), ExecError> {
        self.stores.push(Store { tensor, addr: addr.clone(), value: v });
        Ok(())
    }
}

/// Runs one thread with symbolic `pid`.
pub fn transition(k: &KernelModule, shape: &SymShape, atoms: &mut Atoms) -> Result<Vec<Store>, ExecError> {
    let mut dom = Transition { shape, atoms, stores: Vec::new() };
    Thread::run(k, &mut dom, Lin::pid(), shape.env.live)?;
    Ok(dom.stores)
}
