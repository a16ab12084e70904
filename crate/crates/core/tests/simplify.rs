use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tenslift::formula::{eval as eval_formula, infer_shape, parse_formula, Formula};
use tenslift::scalar::rel_error;
use tenslift::simplify::{
    default_rules, saturate, simplify, simplify_with, CostModel, EGraph, GuardKind, Limits, Rule, SimplifyConfig,
};
use tenslift::Tensor;

const SHAPES: [&[usize]; 5] = [&[], &[3], &[2, 3], &[2, 1], &[3, 2]];

fn rule_vars(r: &Rule) -> BTreeSet<String> {
    let mut vars = BTreeSet::new();
    r.lhs_formula.inputs(&mut vars);
    vars
}

fn guard_of(r: &Rule, v: &str) -> Option<GuardKind> {
    r.guards.iter().find(|g| g.var == v).map(|g| g.kind)
}

/// Evaluates both sides of `r` on one random binding drawn to satisfy its guards.
/// `None` when the binding is not an instance the e-graph would rewrite: either side
/// ill-typed, the shapes differ, or the left side is undefined.
fn rule_instance(r: &Rule, rng: &mut ChaCha8Rng) -> Option<(Tensor<f64>, Tensor<f64>)> {
    let mut env: BTreeMap<String, Tensor<f64>> = BTreeMap::new();
    for v in rule_vars(r) {
        let guard = guard_of(r, &v);
        let dims: Vec<usize> = match guard {
            Some(GuardKind::RowInvariant) => [&[][..], &[2, 1]][rng.gen_range(0..2)].to_vec(),
            _ => SHAPES[rng.gen_range(0..SHAPES.len())].to_vec(),
        };
        let n = dims.iter().product();
        let data = (0..n)
            .map(|_| match guard {
                Some(GuardKind::Positive) => rng.gen_range(0.1..3.0),
                _ => {
                    let x: f64 = rng.gen_range(0.1..3.0);
                    if rng.gen_bool(0.5) { -x } else { x }
                }
            })
            .collect();
        env.insert(v, Tensor::new(dims, data));
    }
    let shape_of = |n: &str| env.get(n).map(|t| t.dims.clone());
    let ls = infer_shape(&r.lhs_formula, &shape_of).ok()?;
    let rs = infer_shape(&r.rhs_formula, &shape_of).ok()?;
    if ls != rs {
        return None;
    }
    let lookup = |n: &str| env.get(n).cloned();
    let l = eval_formula::<f64>(&r.lhs_formula, &lookup).ok()?;
    if l.data.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let r = eval_formula::<f64>(&r.rhs_formula, &lookup).ok()?;
    Some((l, r))
}

#[test]
fn every_rule_is_exercised_by_the_sampler() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for r in default_rules() {
        let hits = (0..1000).filter(|_| rule_instance(&r, &mut rng).is_some()).count();
        assert!(hits >= 50, "{} only sampled {} times", r.name, hits);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rules_preserve_values(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for r in default_rules() {
            if let Some((l, rv)) = rule_instance(&r, &mut rng) {
                prop_assert_eq!(&l.dims, &rv.dims, "{}", r.name);
                for (a, b) in l.data.iter().zip(&rv.data) {
                    prop_assert!(rel_error(*a, *b) <= 1e-9, "{}: {} vs {}", r.name, a, b);
                }
            }
        }
    }
}

fn graph_with(srcs: &[&str]) -> (EGraph, Vec<usize>) {
    let fs: Vec<_> = srcs.iter().map(|s| parse_formula(s).unwrap()).collect();
    let shapes = ["x", "y", "z"].iter().map(|n| (n.to_string(), vec![2, 3])).collect();
    let mut g = EGraph::new(shapes, BTreeSet::new());
    let ids = fs.iter().map(|f| g.add_formula(f)).collect();
    g.rebuild();
    (g, ids)
}

const TERMS: [&str; 6] = ["x + y", "exp(x) * y", "exp(x + y) - z", "sum(x * y)", "-(x / z)", "(x + y) * exp(x)"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Random unions followed by a rebuild leave the hashcons congruence-closed, and
    /// rebuilding never splits classes.
    #[test]
    fn rebuild_restores_congruence(pairs in prop::collection::vec((0usize..64, 0usize..64), 1..12)) {
        let (mut g, _) = graph_with(&TERMS);
        let ids = g.class_ids();
        for (a, b) in pairs {
            let (a, b) = (ids[a % ids.len()], ids[b % ids.len()]);
            let before = g.class(g.find(a)).data.shape.clone();
            if before != g.class(g.find(b)).data.shape {
                continue;
            }
            g.union(a, b);
            let classes = g.num_classes();
            g.rebuild();
            prop_assert!(g.num_classes() <= classes);
            prop_assert!(g.is_congruent());
            prop_assert_eq!(g.find(a), g.find(b));
        }
    }

    /// Saturation only merges: classes equal before stay equal, and nodes are kept.
    #[test]
    fn saturation_is_monotone(k in 1usize..5) {
        let (mut g, roots) = graph_with(&TERMS);
        let nodes = g.num_nodes();
        let before: Vec<usize> = roots.iter().map(|&r| g.find(r)).collect();
        let rules = default_rules();
        let rules: Vec<&Rule> = rules.iter().collect();
        saturate(&mut g, &rules, Limits { iterations: k, nodes: 20_000 });
        prop_assert!(g.num_nodes() >= nodes);
        prop_assert!(g.is_congruent());
        for (i, a) in before.iter().enumerate() {
            for (j, b) in before.iter().enumerate() {
                if a == b {
                    prop_assert_eq!(g.find(roots[i]), g.find(roots[j]));
                }
            }
        }
    }
}

#[test]
fn softmax_derivation_lands_in_one_class() {
    let chain = [
        "exp(x - max(x)) / sum(exp(x - max(x)))",
        "(exp(x) / exp(max(x))) / sum(exp(x) / exp(max(x)))",
        "(exp(x) / exp(max(x))) / (sum(exp(x)) / exp(max(x)))",
        "exp(x) / sum(exp(x))",
    ];
    let fs: Vec<_> = chain.iter().map(|s| parse_formula(s).unwrap()).collect();
    let mut g = EGraph::new([("x".to_string(), vec![6, 8])].into(), BTreeSet::new());
    let ids: Vec<_> = fs.iter().map(|f| g.add_formula(f)).collect();
    g.rebuild();
    let rules = default_rules();
    let rules: Vec<&Rule> = rules.iter().filter(|r| !r.trusted).collect();
    saturate(&mut g, &rules, Limits::default());
    for id in &ids[1..] {
        assert_eq!(g.find(ids[0]), g.find(*id));
    }
}

/// Formulas the synthesizer produces for the corpus, before simplification.
const CORPUS_FORMULAS: [&str; 12] = [
    "exp(x - max(x)) / sum(exp(x - max(x)))",
    "x - max(x) - log(sum(exp(x - max(x))))",
    "x / (1 + exp(-x))",
    "1 / (1 + exp(-x))",
    "x1 * (x2 / (1 + exp(-x1)))",
    "x * w / sqrt(eps + sum(x * x) / 4)",
    "(x - sum(x) / 4) / sqrt(sum((x - sum(x) / 4) * (x - sum(x) / 4)) / 4 + eps)",
    "exp(q @ transpose(k) - max(q @ transpose(k))) @ v / sum(exp(q @ transpose(k) - max(q @ transpose(k))))",
    "x * 1.4426950408889634",
    "ifpos(x, x, 0) * ifpos(x, x, 0)",
    "(x1 + 0) * 1",
    "0.5 * x * (1 + tanh(0.7978845608 * (x + 0.044715 * x * x * x)))",
];

#[test]
fn simplification_preserves_values_and_never_costs_more() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cost = CostModel::default();
    for src in CORPUS_FORMULAS {
        let f = parse_formula(src).unwrap();
        let s = simplify(&f).unwrap_or_else(|e| panic!("{}: {}", src, e));
        assert!(s.cost_after <= s.cost_before, "{} became {}", src, s.formula);
        assert_eq!(s.cost_after, cost.cost(&s.formula));
        let shapes = tenslift::simplify::probe_shapes(&f).unwrap();
        let mut names = BTreeSet::new();
        f.inputs(&mut names);
        let positive = src.contains("log") || src.contains("sqrt");
        for _ in 0..100 {
            let env: BTreeMap<String, Tensor<f64>> = names
                .iter()
                .map(|n| {
                    let dims = if n == "eps" { vec![] } else { shapes[n].clone() };
                    let len = dims.iter().product();
                    let lo = if positive { 0.1 } else { -2.0 };
                    (n.clone(), Tensor::new(dims, (0..len).map(|_| rng.gen_range(lo..2.0)).collect()))
                })
                .collect();
            let lookup = |n: &str| env.get(n).cloned();
            let a = eval_formula::<f64>(&f, &lookup).unwrap();
            let b = eval_formula::<f64>(&s.formula, &lookup).unwrap();
            let b = tenslift::tensor::expand(&b, &a.dims).unwrap_or(b);
            assert_eq!(a.dims, b.dims, "{}", src);
            for (x, y) in a.data.iter().zip(&b.data) {
                assert!(rel_error(*x, *y) <= 1e-9, "{} vs {}: {} vs {}", src, s.formula, x, y);
            }
        }
    }
}

#[test]
fn stable_forms_simplify_to_their_textbook_forms() {
    let cases = [
        ("exp(x - max(x)) / sum(exp(x - max(x)))", "exp(x) / sum(exp(x))"),
        ("(x1 + 0) * 1", "x1"),
        ("x * 1.4426950408889634", "x * log2(e)"),
    ];
    for (src, want) in cases {
        let got = simplify(&parse_formula(src).unwrap()).unwrap().formula;
        assert!(
            tenslift::pipeline::golden_equivalent(&got, &parse_formula(want).unwrap()),
            "{} simplified to {}",
            src,
            got
        );
    }
}

#[test]
fn trusted_rules_need_the_flag_and_a_sign_fact() {
    let f = parse_formula("sqrt(a) * sqrt(a)").unwrap();
    let shapes: BTreeMap<String, Vec<usize>> = [("a".to_string(), vec![4])].into();
    let plain = SimplifyConfig { shapes: shapes.clone(), ..SimplifyConfig::default() };
    assert_eq!(simplify_with(&f, &plain).unwrap().formula, f);
    let unsigned = SimplifyConfig { trusted: true, ..plain.clone() };
    assert_eq!(simplify_with(&f, &unsigned).unwrap().formula, f);
    let signed = SimplifyConfig { positive: ["a".to_string()].into(), ..unsigned };
    assert_eq!(simplify_with(&f, &signed).unwrap().formula, Formula::input("a").into());
}
