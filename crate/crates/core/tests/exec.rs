use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tenslift::exec::{default_shape, execute, execute_in_order, run_concrete, ConcreteInputs, ExecError, ShapeEnv};
use tenslift::kernel::{parse_kernel, KernelModule, ParamKind};
use tenslift::scalar::{ratio, Rational};
use tenslift::sym::{eval, Elem};
use tenslift::Tensor;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn corpus() -> Vec<KernelModule> {
    let mut files: Vec<_> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "klift"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| parse_kernel(&std::fs::read_to_string(p).unwrap()).unwrap_or_else(|e| panic!("{}: {}", p.display(), e)))
        .collect()
}

fn load(name: &str) -> KernelModule {
    parse_kernel(&std::fs::read_to_string(corpus_dir().join(format!("{}.klift", name))).unwrap()).unwrap()
}

/// Random positive-or-negative rationals with small denominators, avoiding zero so
/// division kernels stay defined; log/sqrt kernels get positive values.
fn random_inputs(k: &KernelModule, env: &ShapeEnv, rng: &mut ChaCha8Rng) -> ConcreteInputs<Rational> {
    let positive = matches!(k.name.as_str(), "log" | "rsqrt" | "layernorm" | "rmsnorm");
    let draw = |rng: &mut ChaCha8Rng| {
        let mut n: i64 = rng.gen_range(1..=40);
        if !positive && rng.gen_bool(0.5) {
            n = -n;
        }
        ratio(n, rng.gen_range(1..=8))
    };
    let mut tensors = BTreeMap::new();
    for (_, p) in k.inputs() {
        let dims = env.dims[&p.name].clone();
        let n = dims.iter().product();
        tensors.insert(p.name.clone(), Tensor::new(dims, (0..n).map(|_| draw(rng)).collect()));
    }
    let mut reals = BTreeMap::new();
    for p in k.params.iter().filter(|p| p.kind == ParamKind::ScalarReal) {
        reals.insert(p.name.clone(), ratio(rng.gen_range(1..=5), 100));
    }
    ConcreteInputs { tensors, reals }
}

#[test]
fn symbolic_execution_agrees_with_concrete_interpreter() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in corpus() {
        let env = default_shape(&k).unwrap_or_else(|e| panic!("{}: {}", k.name, e));
        let spec = execute(&k, &env).unwrap();
        for _ in 0..50 {
            let inputs = random_inputs(&k, &env, &mut rng);
            let concrete = run_concrete(&k, &env, &inputs).unwrap();
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
                let expected = &concrete[&out.name];
                for (i, term) in out.elems.iter().enumerate() {
                    let got: Rational = eval(term, &|e| binding.get(&e).cloned()).unwrap();
                    assert_eq!(got, expected.data[i], "{} {}[{}]", k.name, out.name, i);
                }
            }
        }
    }
}

#[test]
fn thread_order_does_not_matter() {
    for k in corpus() {
        let env = default_shape(&k).unwrap();
        let forward = execute(&k, &env).unwrap();
        let reversed = execute_in_order(&k, &env, (0..env.grid).rev()).unwrap();
        for (a, b) in forward.outputs.iter().zip(&reversed.outputs) {
            assert_eq!(a.elems, b.elems, "{}", k.name);
        }
    }
}

#[test]
fn default_shapes() {
    let softmax = default_shape(&load("softmax")).unwrap();
    assert_eq!(softmax.dims["x"], vec![2, 4]);
    assert_eq!(softmax.grid, 2);
    let add = default_shape(&load("add")).unwrap();
    assert_eq!(add.dims["x1"], vec![8]);
    assert_eq!(add.grid, 2);
    let mm = default_shape(&load("matmul")).unwrap();
    assert_eq!(mm.dims["a"], vec![2, 4]);
    assert_eq!(mm.dims["b"], vec![4, 4]);
    assert_eq!(mm.grid, 2);
}

/// Two kernels that agree on a single row but differ across rows must yield
/// different specifications at the default shape.
#[test]
fn default_shape_distinguishes_row_and_global_reductions() {
    let row_sum = parse_kernel(
        "kernel rs(y: out[rows, 4], x: in[rows, 4], rows: int) grid(rows) block(4) {
            r = program_id
            v = load(x + r * 4 + arange(0, 4))
            store(y + r * 4 + arange(0, 4), v / sum(v))
        }",
    )
    .unwrap();
    // Normalizes each row by the sum of the first row only; identical to rs on one row.
    let first_row = parse_kernel(
        "kernel fr(y: out[rows, 4], x: in[rows, 4], rows: int) grid(rows) block(4) {
            r = program_id
            v = load(x + r * 4 + arange(0, 4))
            store(y + r * 4 + arange(0, 4), v / sum(load(x + arange(0, 4))))
        }",
    )
    .unwrap();
    let env = default_shape(&row_sum).unwrap();
    assert_eq!(env, default_shape(&first_row).unwrap());
    let a = execute(&row_sum, &env).unwrap();
    let b = execute(&first_row, &env).unwrap();
    assert_ne!(a.outputs[0].elems, b.outputs[0].elems);

    let one_row = ShapeEnv::bind(&row_sum, &BTreeMap::from([("rows".to_string(), 1)])).unwrap();
    let a1 = execute(&row_sum, &one_row).unwrap();
    let b1 = execute(&first_row, &one_row).unwrap();
    assert_eq!(a1.outputs[0].elems, b1.outputs[0].elems);
}

#[test]
fn add_spec_is_elementwise_sum() {
    let k = load("add");
    let env = ShapeEnv::bind(&k, &BTreeMap::from([("n".to_string(), 4)])).unwrap();
    assert_eq!(env.grid, 1);
    let spec = execute(&k, &env).unwrap();
    let rendered: Vec<String> = spec.outputs[0].elems.iter().map(|t| t.display(&spec.names).to_string()).collect();
    assert_eq!(rendered, vec!["(x1[0] + x2[0])", "(x1[1] + x2[1])", "(x1[2] + x2[2])", "(x1[3] + x2[3])"]);
}

#[test]
fn softmax_with_three_live_columns() {
    let k = load("softmax");
    let env = ShapeEnv::bind(&k, &BTreeMap::from([("rows".to_string(), 1), ("num_cols".to_string(), 3)])).unwrap();
    assert_eq!(env.live, 3);
    let spec = execute(&k, &env).unwrap();
    let y = &spec.outputs[0];
    assert_eq!(y.elems.len(), 3);
    let r = y.elems[0].display(&spec.names).to_string();
    let m = "ite(x[0] > ite(x[1] > x[2], x[1], x[2]), x[0], ite(x[1] > x[2], x[1], x[2]))";
    assert_eq!(
        r,
        format!("(exp((x[0] + -{m})) / (exp((x[0] + -{m})) + exp((x[1] + -{m})) + exp((x[2] + -{m}))))")
    );
}

#[test]
fn double_write_is_rejected() {
    let k = parse_kernel(
        "kernel bad(y: out[n], x: in[n], n: int) grid(n / 4) block(4) {
            store(y + arange(0, 4), load(x + program_id * 4 + arange(0, 4)))
        }",
    )
    .unwrap();
    let env = ShapeEnv::bind(&k, &BTreeMap::from([("n".to_string(), 8)])).unwrap();
    let err = execute(&k, &env).unwrap_err();
    assert!(matches!(err, ExecError::DoubleWrite { first: 0, second: 1, .. }), "{}", err);
}

#[test]
fn out_of_bounds_and_unwritten_outputs() {
    let k = parse_kernel(
        "kernel oob(y: out[n], x: in[n], n: int) grid(n / 4) block(4) {
            o = program_id * 4 + arange(0, 4)
            store(y + o, load(x + o + 1))
        }",
    )
    .unwrap();
    let env = ShapeEnv::bind(&k, &BTreeMap::from([("n".to_string(), 8)])).unwrap();
    assert!(matches!(execute(&k, &env).unwrap_err(), ExecError::OutOfBounds { index: 8, .. }));

    let k = parse_kernel(
        "kernel half(y: out[n], x: in[n], n: int) grid(n / 8) block(4) {
            o = program_id * 8 + arange(0, 4)
            store(y + o, load(x + o))
        }",
    )
    .unwrap();
    let env = ShapeEnv::bind(&k, &BTreeMap::from([("n".to_string(), 8)])).unwrap();
    assert!(matches!(execute(&k, &env).unwrap_err(), ExecError::NeverWritten { index: 4, .. }));
}
