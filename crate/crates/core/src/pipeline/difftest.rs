use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::exec::{default_shape, run_concrete, ConcreteInputs};
use crate::formula::{eval, Formula};
use crate::kernel::{KernelModule, ParamKind};
use crate::scalar::{rational_to_f64, rel_error, MathFn};
use crate::sym::Rel;
use crate::tensor::{expand, Tensor};

/// Attempts per trial before it is skipped.
const RETRIES: usize = 10;

#[derive(Debug, Clone)]
pub struct DiffConfig {
    pub trials: usize,
    pub tol: f64,
    /// Sampling interval; `None` picks [-2, 2], or [0.1, 4] when log or sqrt is involved.
    pub range: Option<(f64, f64)>,
    pub seed: u64,
}

impl Default for DiffConfig {
    fn default() -> DiffConfig {
        DiffConfig { trials: 100, tol: 1e-5, range: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffOutcome {
    pub trials: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
    pub passed: bool,
    pub range: (f64, f64),
    pub notes: Vec<String>,
}

/// Default sampling interval for a formula.
pub fn default_range(f: &Formula) -> (f64, f64) {
    let mut fns = std::collections::BTreeSet::new();
    f.functions(&mut fns);
    if fns.contains(&MathFn::Log) || fns.contains(&MathFn::Sqrt) {
        (0.1, 4.0)
    } else {
        (-2.0, 2.0)
    }
}

/// Runs `k` on the concrete interpreter and `f` on the reference evaluator over random
/// inputs at the kernel's default shape.
pub fn differential_test(k: &KernelModule, f: &Formula, cfg: &DiffConfig) -> Result<DiffOutcome, String> {
    let env = default_shape(k).map_err(|e| e.to_string())?;
    let out = k.outputs().next().map(|(_, p)| p.name.clone()).ok_or("kernel has no output")?;
    let range = cfg.range.unwrap_or_else(|| default_range(f));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut outcome = DiffOutcome { trials: 0, skipped: 0, max_rel_error: 0.0, passed: true, range, notes: Vec::new() };
    let sample = |rng: &mut ChaCha8Rng| rng.gen_range(range.0..=range.1);
    for _ in 0..cfg.trials {
        let mut err = None;
        let mut last = String::new();
        for _ in 0..RETRIES {
            let mut tensors = BTreeMap::new();
            let mut reals = BTreeMap::new();
            for (_, p) in k.inputs() {
                let dims = env.dims[&p.name].clone();
                let n = dims.iter().product();
                tensors.insert(p.name.clone(), Tensor::new(dims, (0..n).map(|_| sample(&mut rng)).collect()));
            }
            let mut ok = true;
            for p in k.params.iter().filter(|p| p.kind == ParamKind::ScalarReal) {
                let v = sample(&mut rng);
                if let Some((rel, c)) = &p.assume {
                    ok &= holds(*rel, v, rational_to_f64(c));
                }
                reals.insert(p.name.clone(), v);
            }
            if !ok {
                last = "sample violates a parameter assumption".into();
                continue;
            }
            let got = match run_concrete::<f64>(k, &env, &ConcreteInputs { tensors: tensors.clone(), reals: reals.clone() }) {
                Ok(mut o) => o.remove(&out).expect("output present"),
                Err(e) => {
                    last = format!("kernel: {}", e);
                    continue;
                }
            };
            let lookup = |n: &str| tensors.get(n).cloned().or_else(|| reals.get(n).map(|v| Tensor::scalar(*v)));
            let want = match eval::<f64>(f, &lookup) {
                Ok(w) => w,
                Err(e) => {
                    last = format!("formula: {}", e);
                    continue;
                }
            };
            let Some(want) = expand(&want, &got.dims) else {
                return Err(format!("formula shape {:?} does not broadcast to {:?}", want.dims, got.dims));
            };
            let e = got.data.iter().zip(&want.data).map(|(a, b)| if a.is_nan() || b.is_nan() { f64::INFINITY } else { rel_error(*a, *b) }).fold(0.0, f64::max);
            err = Some(e);
            break;
        }
        match err {
            Some(e) => {
                outcome.trials += 1;
                outcome.max_rel_error = outcome.max_rel_error.max(e);
            }
            None => {
                outcome.skipped += 1;
                if outcome.notes.len() < 3 {
                    outcome.notes.push(format!("skipped after {} domain errors: {}", RETRIES, last));
                }
            }
        }
    }
    outcome.passed = outcome.trials > 0 && outcome.max_rel_error <= cfg.tol;
    Ok(outcome)
}

fn holds(rel: Rel, a: f64, b: f64) -> bool {
    rel.holds(&a, &b)
}
