//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero on any failure.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tenslift::exec::{default_shape, execute, run_concrete, ConcreteInputs, ShapeEnv};
use tenslift::formula::{eval as eval_formula, infer_shape, parse_formula, BinOp, Formula};
use tenslift::kernel::{KernelModule, ParamKind};
use tenslift::pipeline::{differential_test, lift_file, load_corpus, run_corpus, Corpus, CorpusFlags, CorpusReport, DiffConfig, LiftOptions};
use tenslift::scalar::{int, ratio, rel_error, Rational};
use tenslift::simplify::{default_rules, recover_constants, EGraph, GuardKind, Rule, RECOVER_TOL};
use tenslift::sym::{eval, Elem};
use tenslift::verify::VerifyVerdict;
use tenslift::Tensor;

type Outcome = Result<String, String>;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn names(s: &BTreeSet<String>) -> String {
    s.iter().cloned().collect::<Vec<_>>().join(",")
}

fn softmax_end_to_end() -> Outcome {
    let start = Instant::now();
    let r = lift_file(&corpus_dir().join("softmax.klift"), &LiftOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let formula = r.synthesis.formula.clone().unwrap_or_default();
    ensure(formula == "exp(x - max(x)) / sum(exp(x - max(x)))", format!("synthesized {}", formula))?;
    let v = r.verification.as_ref().ok_or("not verified")?;
    ensure(v.verdict == VerifyVerdict::Verified, format!("verdict {:?}", v.verdict))?;
    for kind in ["init", "preserve", "exit"] {
        let vc = v.vcs.iter().find(|c| c.id.starts_with(kind)).ok_or(format!("no {} condition", kind))?;
        ensure(vc.result == "unsat", format!("{} is {}", vc.id, vc.result))?;
    }
    let simplified = r.simplified.clone().unwrap_or_default();
    ensure(simplified == "exp(x) / sum(exp(x))", format!("simplified to {}", simplified))?;
    ensure(elapsed <= Duration::from_secs(30), format!("took {:.1}s", elapsed.as_secs_f64()))?;
    Ok(format!("{} => {} in {:.2}s", formula, simplified, elapsed.as_secs_f64()))
}

fn synthesis_floor(c: &Corpus, full: &CorpusReport) -> Outcome {
    let n = full.synthesized.len();
    ensure(n >= 16, format!("only {} synthesized", n))?;
    for k in &full.kernels {
        if k.expected_synth {
            ensure(k.report.synthesized(), format!("{} did not synthesize", k.name))?;
            ensure(k.report.synthesis.time <= Duration::from_secs(60), format!("{} took {:?}", k.name, k.report.synthesis.time))?;
        }
    }
    Ok(format!("{}/{} synthesized", n, c.kernels.len()))
}

fn verification_floor(full: &CorpusReport) -> Outcome {
    let verified = full.verified_set();
    ensure(verified.len() >= 12, format!("only {} verified", verified.len()))?;
    let required = ["add", "sub", "mul", "div", "neg", "reciprocal", "exp", "relu", "leakyrelu", "sigmoid", "silu", "sum", "max", "softmax"];
    let missing: BTreeSet<String> = required.iter().filter(|k| !verified.contains(**k)).map(|k| k.to_string()).collect();
    ensure(missing.is_empty(), format!("not verified: {}", names(&missing)))?;
    for k in &full.kernels {
        let Some(v) = &k.report.verification else { continue };
        ensure(!matches!(v.verdict, VerifyVerdict::Refuted { .. }), format!("{} was refuted", k.name))?;
        if k.expected_verify.as_deref() == Some("verified") {
            ensure(k.report.verified(), format!("{} is {}, manifest requires verified", k.name, v.verdict.label()))?;
        }
    }
    Ok(format!("{}/{} verified", verified.len(), full.kernels.len()))
}

fn ablations(c: &Corpus, full: &CorpusReport) -> Outcome {
    let base = CorpusFlags { workers: 1, ..CorpusFlags::default() };
    let no_top = run_corpus(c, &CorpusFlags { no_topdown: true, no_verify: true, synth_budget: Duration::from_secs(10), ..base.clone() });
    let (s_full, s_bu) = (full.synthesized_set(), no_top.synthesized_set());
    ensure(s_bu.is_subset(&s_full) && s_bu.len() < s_full.len(), format!("no-topdown set {} is not a strict subset", names(&s_bu)))?;
    ensure(!s_bu.contains("softmax"), "softmax synthesized without top-down")?;

    let no_prune = run_corpus(c, &CorpusFlags { no_prune: true, no_verify: true, ..base.clone() });
    let grew: Vec<&str> = full
        .kernels
        .iter()
        .filter(|k| no_prune.get(&k.name).is_some_and(|p| p.report.synthesis.programs > k.report.synthesis.programs))
        .map(|k| k.name.as_str())
        .collect();
    ensure(grew.len() >= 3, format!("enumeration grew on only {:?}", grew))?;

    let no_pattern = run_corpus(c, &CorpusFlags { no_verify_pattern: true, vc_timeout: Duration::from_secs(10), ..base });
    let (v_full, v_tmpl) = (full.verified_set(), no_pattern.verified_set());
    ensure(v_tmpl.is_subset(&v_full) && v_tmpl.len() < v_full.len(), format!("no-verify-pattern set {} is not a strict subset", names(&v_tmpl)))?;
    Ok(format!(
        "no-topdown {}/{} synthesized; no-prune grows {} kernels; no-verify-pattern {}/{} verified",
        s_bu.len(),
        s_full.len(),
        grew.len(),
        v_tmpl.len(),
        v_full.len()
    ))
}

fn constant_recovery() -> Outcome {
    let f = recover_constants(&parse_formula("x * 1.4426950216293335").unwrap(), RECOVER_TOL);
    ensure(f.to_string() == "x * log2(e)", format!("recovered {}", f))?;
    let g = recover_constants(&parse_formula("ifpos(x, x, x * 0.01)").unwrap(), RECOVER_TOL);
    ensure(g.to_string() == "ifpos(x, x, x * 0.01)", format!("leaky slope became {}", g))?;
    Ok("1.4426950216293335 -> log2(e); 0.01 kept".into())
}

fn differential(c: &Corpus, full: &CorpusReport) -> Outcome {
    let mut checked = 0;
    for k in &full.kernels {
        let Some(f) = &k.report.formula else { continue };
        let d = k.report.differential.as_ref().ok_or(format!("{} was not tested", k.name))?;
        ensure(d.passed && d.trials == 100, format!("{}: max rel error {}", k.name, d.max_rel_error))?;
        let kernel = &c.kernels.iter().find(|(n, _)| *n == k.name).unwrap().1;
        let cfg = DiffConfig { range: c.manifest.kernels.get(&k.name).and_then(|e| e.range), ..DiffConfig::default() };
        let corrupted = Formula::bin(BinOp::Add, f.clone().into(), Formula::constant(int(1)).into());
        let bad = differential_test(kernel, &corrupted, &cfg)?;
        ensure(!bad.passed, format!("{}: corrupted formula passed", k.name))?;
        checked += 1;
    }
    Ok(format!("{} formulas pass, {} corrupted controls fail", checked, checked))
}

fn rational_inputs(k: &KernelModule, env: &ShapeEnv, rng: &mut ChaCha8Rng) -> ConcreteInputs<Rational> {
    let positive = matches!(k.name.as_str(), "log" | "rsqrt" | "layernorm" | "rmsnorm");
    let mut tensors = BTreeMap::new();
    for (_, p) in k.inputs() {
        let dims = env.dims[&p.name].clone();
        let n: usize = dims.iter().product();
        let data = (0..n)
            .map(|_| {
                let v: i64 = rng.gen_range(1..=40);
                ratio(if positive || rng.gen_bool(0.5) { v } else { -v }, rng.gen_range(1..=8))
            })
            .collect();
        tensors.insert(p.name.clone(), Tensor::new(dims, data));
    }
    let reals = k.params.iter().filter(|p| p.kind == ParamKind::ScalarReal).map(|p| (p.name.clone(), ratio(rng.gen_range(1..=5), 100))).collect();
    ConcreteInputs { tensors, reals }
}

fn executor_soundness(c: &Corpus, rng: &mut ChaCha8Rng) -> Result<usize, String> {
    for (name, k) in &c.kernels {
        let env = default_shape(k).map_err(|e| e.to_string())?;
        let spec = execute(k, &env).map_err(|e| e.to_string())?;
        for _ in 0..50 {
            let inputs = rational_inputs(k, &env, rng);
            let concrete = run_concrete(k, &env, &inputs).map_err(|e| e.to_string())?;
            let mut binding: HashMap<Elem, Rational> = HashMap::new();
            for (pos, p) in k.params.iter().enumerate() {
                if let Some(t) = inputs.tensors.get(&p.name) {
                    for (i, v) in t.data.iter().enumerate() {
                        binding.insert(Elem { tensor: pos as u32, index: i as u32 }, v.clone());
                    }
                }
                if let Some(v) = inputs.reals.get(&p.name) {
                    binding.insert(Elem { tensor: pos as u32, index: 0 }, v.clone());
                }
            }
            for out in &spec.outputs {
                for (i, term) in out.elems.iter().enumerate() {
                    let got = eval::<Rational>(term, &|e| binding.get(&e).cloned()).map_err(|e| format!("{}: {}", name, e))?;
                    ensure(got == concrete[&out.name].data[i], format!("{}: element {} differs", name, i))?;
                }
            }
        }
    }
    Ok(c.kernels.len())
}

fn rule_instance(r: &Rule, rng: &mut ChaCha8Rng) -> Option<(Tensor<f64>, Tensor<f64>)> {
    const SHAPES: [&[usize]; 5] = [&[], &[3], &[2, 3], &[2, 1], &[3, 2]];
    let mut vars = BTreeSet::new();
    r.lhs_formula.inputs(&mut vars);
    let mut env: BTreeMap<String, Tensor<f64>> = BTreeMap::new();
    for v in vars {
        let guard = r.guards.iter().find(|g| g.var == v).map(|g| g.kind);
        let dims = match guard {
            Some(GuardKind::RowInvariant) => [&[][..], &[2, 1]][rng.gen_range(0..2)].to_vec(),
            _ => SHAPES[rng.gen_range(0..SHAPES.len())].to_vec(),
        };
        let n = dims.iter().product();
        let data = (0..n)
            .map(|_| {
                let x: f64 = rng.gen_range(0.1..3.0);
                if guard != Some(GuardKind::Positive) && rng.gen_bool(0.5) { -x } else { x }
            })
            .collect();
        env.insert(v, Tensor::new(dims, data));
    }
    let shape_of = |n: &str| env.get(n).map(|t| t.dims.clone());
    if infer_shape(&r.lhs_formula, &shape_of).ok()? != infer_shape(&r.rhs_formula, &shape_of).ok()? {
        return None;
    }
    let lookup = |n: &str| env.get(n).cloned();
    let l = eval_formula::<f64>(&r.lhs_formula, &lookup).ok()?;
    if l.data.iter().any(|x| !x.is_finite()) {
        return None;
    }
    Some((l, eval_formula::<f64>(&r.rhs_formula, &lookup).ok()?))
}

fn rule_soundness(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let rules = default_rules();
    for r in &rules {
        let mut hits = 0;
        for _ in 0..1000 {
            let Some((l, rv)) = rule_instance(r, rng) else { continue };
            hits += 1;
            ensure(l.dims == rv.dims, format!("{} changes shape", r.name))?;
            for (a, b) in l.data.iter().zip(&rv.data) {
                ensure(rel_error(*a, *b) <= 1e-9, format!("{}: {} vs {}", r.name, a, b))?;
            }
        }
        ensure(hits > 0, format!("{} never instantiated", r.name))?;
    }
    Ok(rules.len())
}

fn congruence(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let terms = ["x + y", "exp(x) * y", "exp(x + y) - z", "sum(x * y)", "-(x / z)", "(x + y) * exp(x)"];
    let mut rebuilds = 0;
    for _ in 0..200 {
        let shapes = ["x", "y", "z"].iter().map(|n| (n.to_string(), vec![2, 3])).collect();
        let mut g = EGraph::new(shapes, BTreeSet::new());
        for t in terms {
            g.add_formula(&parse_formula(t).unwrap());
        }
        g.rebuild();
        let ids = g.class_ids();
        for _ in 0..rng.gen_range(1..12) {
            let (a, b) = (ids[rng.gen_range(0..ids.len())], ids[rng.gen_range(0..ids.len())]);
            if g.class(g.find(a)).data.shape != g.class(g.find(b)).data.shape {
                continue;
            }
            g.union(a, b);
            g.rebuild();
            rebuilds += 1;
            ensure(g.is_congruent(), "hashcons not congruence-closed after rebuild")?;
        }
    }
    Ok(rebuilds)
}

fn vc_brute_force(c: &Corpus, full: &CorpusReport, rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let mut checked = 0;
    for k in &full.kernels {
        let (Some(f), true) = (&k.report.formula, k.report.verified()) else { continue };
        let kernel = &c.kernels.iter().find(|(n, _)| *n == k.name).unwrap().1;
        let free = kernel.free_int_params();
        let mut fns = BTreeSet::new();
        f.functions(&mut fns);
        if free.len() != 1 || !fns.is_empty() {
            continue;
        }
        for len in [4i64, 8, 12] {
            let Ok(env) = ShapeEnv::bind(kernel, &[(free[0].to_string(), len)].into()) else { continue };
            for _ in 0..20 {
                let inputs = rational_inputs(kernel, &env, rng);
                let out = run_concrete(kernel, &env, &inputs).map_err(|e| e.to_string())?;
                let got = out.values().next().unwrap();
                let want = eval_formula::<Rational>(f, &|n| inputs.tensors.get(n).cloned().or_else(|| inputs.reals.get(n).map(|v| Tensor::scalar(v.clone()))))
                    .map_err(|e| e.to_string())?;
                let want = tenslift::tensor::expand(&want, &got.dims).ok_or("shape mismatch")?;
                ensure(got.data == want.data, format!("{} at length {}", k.name, len))?;
            }
        }
        checked += 1;
    }
    ensure(checked > 0, "no kernel checked")?;
    Ok(checked)
}

fn properties(c: &Corpus, full: &CorpusReport) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let kernels = executor_soundness(c, &mut rng)?;
    let rules = rule_soundness(&mut rng)?;
    let rebuilds = congruence(&mut rng)?;
    let vcs = vc_brute_force(c, full, &mut rng)?;
    Ok(format!(
        "executor {} kernels x 50; {} rules x 1000; {} rebuilds congruent; {} verified kernels at lengths 4/8/12 ({:.1}s)",
        kernels,
        rules,
        rebuilds,
        vcs,
        start.elapsed().as_secs_f64()
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let corpus = load_corpus(&corpus_dir()).expect("corpus loads");
    let full = run_corpus(&corpus, &CorpusFlags { workers: 1, ..CorpusFlags::default() });
    let results: Vec<(&str, Outcome)> = vec![
        ("softmax end to end", softmax_end_to_end()),
        ("synthesis floor", synthesis_floor(&corpus, &full)),
        ("verification floor", verification_floor(&full)),
        ("ablation directions", ablations(&corpus, &full)),
        ("constant recovery", constant_recovery()),
        ("differential testing", differential(&corpus, &full)),
        ("property suites", properties(&corpus, &full)),
    ];
    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(d) => println!("criterion {} ({}): PASS  {}", i + 1, name, d),
            Err(e) => {
                failed += 1;
                println!("criterion {} ({}): FAIL  {}", i + 1, name, e);
            }
        }
    }
    println!("acceptance: {}/{} passed in {:.1}s", results.len() - failed, results.len(), start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
