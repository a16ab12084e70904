use std::collections::BTreeMap;
use std::fmt;

/// Integer variables of index arithmetic. `Div`/`Mod` are opaque quotient and
/// remainder atoms by a positive constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IVar {
    Pid,
    Grid,
    /// The quantified output index.
    Idx,
    Div(Box<Lin>, i64),
    Mod(Box<Lin>, i64),
}

/// Linear integer expression `c + Σ coeff·var`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lin {
    pub terms: BTreeMap<IVar, i64>,
    pub c: i64,
}

impl Lin {
    pub fn constant(c: i64) -> Lin {
        Lin { terms: BTreeMap::new(), c }
    }

    pub fn var(v: IVar) -> Lin {
        Lin { terms: BTreeMap::from([(v, 1)]), c: 0 }
    }

    pub fn pid() -> Lin {
        Lin::var(IVar::Pid)
    }

    pub fn grid() -> Lin {
        Lin::var(IVar::Grid)
    }

    pub fn idx() -> Lin {
        Lin::var(IVar::Idx)
    }

    /// `v0 + (G - g0)·(v1 - v0)`: the line through two samples at grids `g0` and `g0 + 1`.
    pub fn fit(v0: i64, v1: i64, g0: i64) -> Lin {
        let slope = v1 - v0;
        Lin::constant(v0 - slope * g0).add(&Lin::grid().scale(slope))
    }

    pub fn as_const(&self) -> Option<i64> {
        self.terms.is_empty().then_some(self.c)
    }

    pub fn coeff(&self, v: &IVar) -> i64 {
        self.terms.get(v).copied().unwrap_or(0)
    }

    pub fn add(&self, o: &Lin) -> Lin {
        let mut out = self.clone();
        out.c += o.c;
        for (v, k) in &o.terms {
            *out.terms.entry(v.clone()).or_insert(0) += k;
        }
        out.terms.retain(|_, k| *k != 0);
        out
    }

    pub fn sub(&self, o: &Lin) -> Lin {
        self.add(&o.scale(-1))
    }

    pub fn scale(&self, k: i64) -> Lin {
        if k == 0 {
            return Lin::constant(0);
        }
        Lin { terms: self.terms.iter().map(|(v, c)| (v.clone(), c * k)).collect(), c: self.c * k }
    }

    /// Product, defined when one side is constant.
    pub fn mul(&self, o: &Lin) -> Option<Lin> {
        match (self.as_const(), o.as_const()) {
            (Some(a), _) => Some(o.scale(a)),
            (_, Some(b)) => Some(self.scale(b)),
            _ => None,
        }
    }

    /// Floor division by `d > 0`; exact when every coefficient is a multiple of `d`.
    pub fn floordiv(&self, d: i64) -> Lin {
        assert!(d > 0);
        if d == 1 {
            return self.clone();
        }
        if self.terms.values().all(|k| k % d == 0) {
            return Lin {
                terms: self.terms.iter().map(|(v, k)| (v.clone(), k / d)).collect(),
                c: self.c.div_euclid(d),
            };
        }
        Lin::var(IVar::Div(Box::new(self.clone()), d))
    }

    /// Euclidean remainder by `d > 0`.
    pub fn modulo(&self, d: i64) -> Lin {
        assert!(d > 0);
        if self.terms.values().all(|k| k % d == 0) {
            return Lin::constant(self.c.rem_euclid(d));
        }
        Lin::var(IVar::Mod(Box::new(self.clone()), d))
    }

    pub fn eval(&self, var: &dyn Fn(&IVar) -> Option<i64>) -> Option<i64> {
        let mut acc = self.c;
        for (v, k) in &self.terms {
            let x = match v {
                IVar::Div(l, d) => l.eval(var)?.div_euclid(*d),
                IVar::Mod(l, d) => l.eval(var)?.rem_euclid(*d),
                _ => var(v)?,
            };
            acc += k * x;
        }
        Some(acc)
    }

    pub fn to_smt(&self) -> String {
        let mut parts: Vec<String> = self
            .terms
            .iter()
            .map(|(v, k)| {
                let v = var_smt(v);
                match k {
                    1 => v,
                    _ => format!("(* {} {})", int_smt(*k), v),
                }
            })
            .collect();
        if self.c != 0 || parts.is_empty() {
            parts.push(int_smt(self.c));
        }
        if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            format!("(+ {})", parts.join(" "))
        }
    }
}

pub fn int_smt(v: i64) -> String {
    if v < 0 {
        format!("(- {})", -(v as i128))
    } else {
        v.to_string()
    }
}

fn var_smt(v: &IVar) -> String {
    match v {
        IVar::Pid => "pid".into(),
        IVar::Grid => "G".into(),
        IVar::Idx => "i".into(),
        IVar::Div(l, d) => format!("(div {} {})", l.to_smt(), d),
        IVar::Mod(l, d) => format!("(mod {} {})", l.to_smt(), d),
    }
}

impl fmt::Display for Lin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_smt())
    }
}
