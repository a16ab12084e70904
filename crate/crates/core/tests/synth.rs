use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;
use std::time::Duration;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tenslift::exec::{default_shape, execute, LiftSpec, ShapeEnv};
use tenslift::formula::{eval as eval_formula, parse_formula, BinOp, Formula, RedOp, F};
use tenslift::kernel::{parse_kernel, KernelModule};
use tenslift::scalar::{int, Rational};
use tenslift::smt::Solver;
use tenslift::sym::{elem_leaves, eval, Elem, Term};
use tenslift::synth::{
    enumerate, guess_sum, prune_type, prune_value, split_by, synthesize, target, CheckResult, Checker, SplitOp,
    SumShape, SynthConfig,
};
use tenslift::{MathFn, Tensor};

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn load(name: &str) -> KernelModule {
    parse_kernel(&std::fs::read_to_string(corpus_dir().join(format!("{}.klift", name))).unwrap()).unwrap()
}

fn spec_of(name: &str) -> (KernelModule, LiftSpec) {
    let k = load(name);
    let env = default_shape(&k).unwrap();
    let spec = execute(&k, &env).unwrap();
    (k, spec)
}

fn solver() -> Solver {
    Solver::from_env(Duration::from_secs(10))
}

fn exhaustive() -> SynthConfig {
    SynthConfig { enable_type_prune: false, enable_value_prune: false, ..SynthConfig::default() }
}

// Depth-1 programs over a single 1-d input of length 8 (the `exp` kernel): distinct
// well-typed values, terminals included. Frozen after cross-checking against the
// naive generator below.
const DEPTH1_PROGRAMS: usize = 23;

/// Naive generator for the same grammar: every constructor applied to every terminal
/// (pair), evaluated from scratch, deduplicated by value.
fn naive_depth1(spec: &LiftSpec) -> usize {
    let inputs: BTreeMap<String, Tensor<Term>> = spec.inputs.iter().map(|t| (t.name.clone(), t.to_tensor())).collect();
    let terminals = vec![Formula::input("x"), Formula::constant(int(0)), Formula::constant(int(1))];
    let mut all: Vec<F> = terminals.clone();
    for a in &terminals {
        all.push(Formula::neg(a.clone()));
        all.push(Formula::apply(MathFn::Exp, a.clone()));
        all.push(Formula::reduce(RedOp::Sum, a.clone()));
        all.push(Formula::permute(a.clone()));
        for b in &terminals {
            for op in BinOp::ALL {
                all.push(Formula::bin(op, a.clone(), b.clone()));
            }
            all.push(Formula::matmul(a.clone(), b.clone()));
        }
    }
    let mut seen = HashSet::new();
    for f in &all {
        if let Ok(v) = eval_formula::<Term>(f, &|n| inputs.get(n).cloned()) {
            seen.insert((v.dims.clone(), v.data.clone()));
        }
    }
    seen.len()
}

#[test]
fn depth1_count_matches_naive_generator_and_is_frozen() {
    let (k, _) = spec_of("exp");
    let env = ShapeEnv::bind(&k, &[("n".to_string(), 8)].into()).unwrap();
    let spec = execute(&k, &env).unwrap();
    assert_eq!(spec.inputs[0].dims, vec![8]);
    let progs = enumerate(&spec, &exhaustive(), 1, &solver());
    let distinct: HashSet<_> = progs.iter().map(|(_, v)| (v.dims.clone(), v.data.clone())).collect();
    assert_eq!(distinct.len(), progs.len(), "enumeration retained duplicates");
    assert_eq!(progs.len(), naive_depth1(&spec));
    assert_eq!(progs.len(), DEPTH1_PROGRAMS);
}

#[test]
fn pruning_only_shrinks_the_program_set() {
    let (_, spec) = spec_of("add");
    let full = enumerate(&spec, &exhaustive(), 2, &solver());
    let pruned = enumerate(&spec, &SynthConfig::default(), 2, &solver());
    assert!(pruned.len() < full.len());
    let full_values: HashSet<_> = full.iter().map(|(_, v)| (v.dims.clone(), v.data.clone())).collect();
    for (f, v) in &pruned {
        assert!(full_values.contains(&(v.dims.clone(), v.data.clone())), "{} only appears with pruning", f);
    }
}

/// Pruning must keep every subterm of a known solution: its value only mentions
/// elements the target mentions, and its shape reaches the target's.
#[test]
fn pruning_keeps_subterms_of_solutions() {
    let cases = [
        ("add", "x1 + x2"),
        ("silu", "x / (1 + exp(-x))"),
        ("silumul", "x1 * x2 / (1 + exp(-x1))"),
        ("softmax", "exp(x) / sum(exp(x))"),
        ("matmul", "a @ b"),
    ];
    for (name, src) in cases {
        let (_, spec) = spec_of(name);
        let t = target(&spec);
        let inputs: BTreeMap<String, Tensor<Term>> =
            spec.inputs.iter().map(|s| (s.name.clone(), s.to_tensor())).collect();
        let f = parse_formula(src).unwrap();
        let mut stack = vec![&f];
        while let Some(g) = stack.pop() {
            stack.extend(g.children());
            let v = eval_formula::<Term>(g, &|n| inputs.get(n).cloned()).unwrap();
            assert!(prune_value(&v, &t), "{}: value pruning drops {}", name, g);
            let remaining = f.depth() - g.depth();
            assert!(prune_type(Some(&v.dims), &t.dims, remaining), "{}: type pruning drops {}", name, g);
        }
    }
}

#[test]
fn type_pruning_rejects_ill_typed_and_unreachable_shapes() {
    assert!(!prune_type(None, &[8], 3));
    assert!(!prune_type(Some(&[3]), &[8], 0));
    assert!(prune_type(Some(&[3]), &[8], 1));
    assert!(prune_type(Some(&[1]), &[8], 0));
}

/// Synthesized formulas agree with the kernel spec on random rational bindings.
#[test]
fn synthesized_formulas_are_sound_on_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for name in ["add", "sub", "mul", "relu", "sum", "max", "squarerelu", "leakyrelu", "neg"] {
        let (_, spec) = spec_of(name);
        let got = synthesize(&spec, &SynthConfig::default(), &solver()).unwrap();
        let inputs: BTreeMap<String, Tensor<Term>> =
            spec.inputs.iter().map(|s| (s.name.clone(), s.to_tensor())).collect();
        let cand = eval_formula::<Term>(&got.formula, &|n| inputs.get(n).cloned()).unwrap();
        let t = target(&spec);
        let mut elems = std::collections::BTreeSet::new();
        for e in t.data.iter().chain(&cand.data) {
            elems.extend(elem_leaves(e));
        }
        for _ in 0..50 {
            let binding: BTreeMap<Elem, Rational> = elems
                .iter()
                .map(|e| (*e, Rational::new(rng.gen_range(-40..=40).into(), rng.gen_range(1..=7).into())))
                .collect();
            let lookup = |e: Elem| binding.get(&e).cloned();
            for (i, te) in t.data.iter().enumerate() {
                let ce = if cand.data.len() == 1 { &cand.data[0] } else { &cand.data[i] };
                let a: Rational = eval(te, &lookup).unwrap();
                let b: Rational = eval(ce, &lookup).unwrap();
                assert_eq!(a, b, "{}: {} differs at element {}", name, got.formula, i);
            }
        }
    }
}

#[test]
fn wrong_candidate_is_rejected_with_a_reproducing_witness() {
    let (_, spec) = spec_of("add");
    let s = solver();
    let mut checker = Checker::new(&spec, &s);
    let f = parse_formula("x1 - x2").unwrap();
    match checker.check_formula(&f, &target(&spec)) {
        CheckResult::Rejected { witness } => {
            let t = target(&spec);
            let cand = checker.evaluate(&f).unwrap();
            let lookup = |e: Elem| Some(witness.get(&checker.symbol(e)).cloned().unwrap_or_else(|| int(0)));
            let differs = t.data.iter().zip(&cand.data).any(|(a, b)| {
                eval::<Rational>(a, &lookup).unwrap() != eval::<Rational>(b, &lookup).unwrap()
            });
            assert!(differs, "witness {:?} does not separate the candidate", witness);
        }
        r => panic!("expected rejection, got {:?}", r),
    }
}

#[test]
fn split_by_decomposes_each_element() {
    let x = |i| Term::elem(1, i);
    let t = Tensor::new(vec![2], vec![Term::add(&x(0), &Term::one()), Term::add(&x(1), &Term::one())]);
    let parts = split_by(&t, SplitOp::Add).unwrap();
    assert_eq!(parts.len(), 2);
    for (i, e) in t.data.iter().enumerate() {
        assert_eq!(&Term::add(&parts[0].data[i], &parts[1].data[i]).canon(), &e.canon());
    }
    assert!(split_by(&t, SplitOp::Mul).is_none());
    let e = Tensor::new(vec![2], vec![Term::apply(MathFn::Exp, &x(0)), Term::apply(MathFn::Exp, &x(1))]);
    let inner = split_by(&e, SplitOp::Fn(MathFn::Exp)).unwrap();
    assert_eq!(inner[0].data, vec![x(0), x(1)]);
}

#[test]
fn guess_sum_recognizes_row_sums_and_products() {
    let x = |i| Term::elem(1, i);
    let row = Term::sum((0..4).map(x).collect());
    let t = Tensor::new(vec![1], vec![row]);
    match guess_sum(&t, 4) {
        Some(SumShape::Plain(inner)) => {
            assert_eq!(inner.dims, vec![4]);
            let got: HashSet<_> = inner.data.iter().cloned().collect();
            assert_eq!(got, (0..4).map(x).collect());
        }
        other => panic!("{:?}", other),
    }
    assert!(guess_sum(&t, 3).is_none());

    let (_, spec) = spec_of("matmul");
    assert!(matches!(guess_sum(&target(&spec), spec.live), Some(SumShape::Dot(..))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Whatever enumeration keeps under full pruning is a subset of the unpruned set.
    #[test]
    fn value_pruned_programs_use_target_elements(seed in 0u64..1000) {
        let names = ["add", "mul", "exp", "neg", "relu"];
        let (_, spec) = spec_of(names[(seed % names.len() as u64) as usize]);
        let t = target(&spec);
        let cfg = SynthConfig { enable_type_prune: false, ..SynthConfig::default() };
        for (f, v) in enumerate(&spec, &cfg, 1, &solver()) {
            prop_assert!(prune_value(&v, &t), "{}", f);
        }
    }
}
