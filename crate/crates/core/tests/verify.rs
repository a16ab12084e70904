use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tenslift::exec::{default_shape, execute, run_concrete, ConcreteInputs, ShapeEnv};
use tenslift::formula::{eval as eval_formula, parse_formula};
use tenslift::kernel::{parse_kernel, KernelModule};
use tenslift::scalar::{ratio, rel_error, Rational};
use tenslift::smt::Solver;
use tenslift::verify::{gen_postcondition, invariant_candidates, verify, Invariant, Mode, VerifyConfig, VerifyVerdict};
use tenslift::Tensor;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn load(name: &str) -> KernelModule {
    parse_kernel(&std::fs::read_to_string(corpus_dir().join(format!("{}.klift", name))).unwrap()).unwrap()
}

fn solver() -> Solver {
    Solver::from_env(Duration::from_secs(10))
}

fn cfg(pattern: bool) -> VerifyConfig {
    VerifyConfig { vc_timeout: Duration::from_secs(10), budget: Duration::from_secs(30), enable_pattern: pattern, artifacts: None }
}

fn check(name: &str, src: &str, pattern: bool) -> tenslift::verify::VerifyReport {
    let k = load(name);
    let spec = execute(&k, &default_shape(&k).unwrap()).unwrap();
    verify(&k, &spec, &parse_formula(src).unwrap(), &cfg(pattern), &solver())
}

/// Shape binding for a kernel with a single free size parameter, sized so that the
/// launch has `grid` programs.
fn env_for_grid(k: &KernelModule, grid: usize) -> ShapeEnv {
    let free = k.free_int_params();
    assert_eq!(free.len(), 1, "{} has several free sizes", k.name);
    for scale in [k.block_size as i64, 1] {
        let env = ShapeEnv::bind(k, &[(free[0].to_string(), grid as i64 * scale)].into()).unwrap();
        if env.grid == grid {
            return env;
        }
    }
    panic!("no binding of {} gives grid {}", k.name, grid);
}

fn parse_value(s: &str) -> f64 {
    match s.split_once('/') {
        Some((n, d)) => n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap(),
        None => s.parse().unwrap(),
    }
}

/// Replays a refutation witness: elements not listed are 1.
fn replay(k: &KernelModule, src: &str, witness: &BTreeMap<String, String>) -> bool {
    let env = env_for_grid(k, witness["grid"].parse().unwrap());
    let mut tensors = BTreeMap::new();
    for (_, p) in k.inputs() {
        let dims = env.dims[&p.name].clone();
        let n = dims.iter().product();
        tensors.insert(p.name.clone(), Tensor::new(dims, vec![1.0f64; n]));
    }
    for (key, v) in witness {
        if let Some((name, idx)) = key.strip_suffix(']').and_then(|k| k.split_once('[')) {
            tensors.get_mut(name).unwrap().data[idx.parse::<usize>().unwrap()] = parse_value(v);
        }
    }
    let inputs = ConcreteInputs { tensors: tensors.clone(), reals: BTreeMap::new() };
    let out = run_concrete::<f64>(k, &env, &inputs).unwrap();
    let got = out.values().next().unwrap();
    let want = eval_formula::<f64>(&parse_formula(src).unwrap(), &|n| tensors.get(n).cloned()).unwrap();
    let want = tenslift::tensor::expand(&want, &got.dims).unwrap();
    got.data.iter().zip(&want.data).any(|(a, b)| rel_error(*a, *b) > 1e-9)
}

#[test]
fn wrong_formulas_are_refuted_with_reproducible_witnesses() {
    for (name, src) in [("add", "x1 - x2"), ("relu", "ifpos(x, x, 0.5 * x)"), ("sum", "sum(x) + 1"), ("neg", "x")] {
        let k = load(name);
        let r = check(name, src, true);
        match &r.verdict {
            VerifyVerdict::Refuted { witness } => assert!(replay(&k, src, witness), "{}: witness {:?} does not reproduce", name, witness),
            v => panic!("{}: {} was not refuted: {:?}", name, src, v),
        }
    }
}

/// Verified formulas agree with the concrete interpreter on small launches of every
/// size, beyond the one the lift spec was extracted at.
#[test]
fn verified_formulas_hold_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cases = [
        ("add", "x1 + x2"),
        ("sub", "x1 - x2"),
        ("mul", "x1 * x2"),
        ("neg", "-x"),
        ("relu", "ifpos(x, x, 0)"),
        ("leakyrelu", "ifpos(x, x, 0.01 * x)"),
        ("squarerelu", "ifpos(x, x * x, 0)"),
        ("zeros", "0"),
    ];
    for (name, src) in cases {
        assert_eq!(check(name, src, true).verdict, VerifyVerdict::Verified, "{}", name);
        let k = load(name);
        let f = parse_formula(src).unwrap();
        for len in [4usize, 8, 12] {
            let env = env_for_grid(&k, len / k.block_size as usize);
            for _ in 0..20 {
                let mut tensors = BTreeMap::new();
                for (_, p) in k.inputs() {
                    let dims = env.dims[&p.name].clone();
                    let n: usize = dims.iter().product();
                    let data: Vec<Rational> = (0..n).map(|_| ratio(rng.gen_range(-30..=30), rng.gen_range(1..=6))).collect();
                    tensors.insert(p.name.clone(), Tensor::new(dims, data));
                }
                let inputs = ConcreteInputs { tensors: tensors.clone(), reals: BTreeMap::new() };
                let out = run_concrete::<Rational>(&k, &env, &inputs).unwrap();
                let got = out.values().next().unwrap();
                assert_eq!(got.data.len(), len);
                let want = eval_formula::<Rational>(&f, &|n| tensors.get(n).cloned()).unwrap();
                let want = tenslift::tensor::expand(&want, &got.dims).unwrap();
                assert_eq!(got.data, want.data, "{} at length {}", name, len);
            }
        }
    }
}

#[test]
fn pattern_and_template_modes_agree() {
    for (name, src) in [("add", "x1 + x2"), ("neg", "-x"), ("exp", "exp(x)"), ("relu", "ifpos(x, x, 0)"), ("sum", "sum(x)")] {
        let p = check(name, src, true);
        let t = check(name, src, false);
        assert_eq!(p.mode, Mode::Pattern);
        assert_eq!(t.mode, Mode::Template);
        assert_eq!(p.verdict, VerifyVerdict::Verified, "{} pattern", name);
        assert_eq!(t.verdict, VerifyVerdict::Verified, "{} template", name);
        let block = load(name).block_size as i64;
        let stride = if name == "sum" { 1 } else { block };
        assert_eq!(p.invariant, Some(Invariant { a: stride, b: 0 }), "{}", name);
        assert_eq!(t.invariant, p.invariant, "{}", name);
        assert_eq!(p.candidates_tried, 1);
    }
}

#[test]
fn template_mode_refutes_wrong_formulas_too() {
    let r = check("add", "x1 * x2", false);
    assert_ne!(r.verdict, VerifyVerdict::Verified);
}

#[test]
fn single_program_grid_uses_the_trivial_invariant() {
    let src = "kernel twice(y: out[4], x: in[4]) grid(1) block(4) {\n    offsets = arange(0, BLOCK_SIZE)\n    store(y + offsets, load(x + offsets) * 2)\n}\n";
    let k = parse_kernel(src).unwrap();
    let spec = execute(&k, &default_shape(&k).unwrap()).unwrap();
    let r = verify(&k, &spec, &parse_formula("2 * x").unwrap(), &cfg(true), &solver());
    assert_eq!(r.verdict, VerifyVerdict::Verified);
    assert_eq!(r.invariant, Some(Invariant { a: 0, b: 0 }));
    assert_eq!(r.candidates_tried, 1);
    let r = verify(&k, &spec, &parse_formula("3 * x").unwrap(), &cfg(true), &solver());
    assert!(matches!(r.verdict, VerifyVerdict::Refuted { .. }), "{:?}", r.verdict);
}

#[test]
fn postcondition_text() {
    let k = load("add");
    let spec = execute(&k, &default_shape(&k).unwrap()).unwrap();
    let post = gen_postcondition(&k, &spec, &parse_formula("x1 + x2").unwrap()).unwrap();
    assert_eq!(post, "(forall ((i Int)) (=> (and (<= 0 i) (< i (* 4 G))) (= (select y i) (+ (select x1 i) (select x2 i)))))");
}

#[test]
fn invariant_candidates_start_with_the_stride() {
    let c = invariant_candidates(4, 4);
    assert_eq!(c[0], Invariant { a: 4, b: 0 });
    assert_eq!(c.len(), 81);
    let mut seen: Vec<_> = c.iter().map(|i| (i.a, i.b)).collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 81);
}

#[test]
fn artifacts_are_written_per_condition() {
    let dir = std::env::temp_dir().join(format!("tenslift-vc-{}", std::process::id()));
    let k = load("exp");
    let spec = execute(&k, &default_shape(&k).unwrap()).unwrap();
    let c = VerifyConfig { artifacts: Some(dir.clone()), ..cfg(false) };
    let r = verify(&k, &spec, &parse_formula("exp(x)").unwrap(), &c, &solver());
    assert_eq!(r.verdict, VerifyVerdict::Verified);
    let files: Vec<_> = std::fs::read_dir(dir.join("exp")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(!files.is_empty());
    for vc in r.vcs.iter().filter(|v| v.result != "proved") {
        assert!(files.iter().any(|f| f.to_string_lossy() == format!("{}.smt2", vc.id)), "{}", vc.id);
    }
    std::fs::remove_dir_all(dir).ok();
}
