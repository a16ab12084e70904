use std::time::{Duration, Instant};

use proptest::prelude::*;
use tenslift::scalar::{int, Rational};
use tenslift::smt::{Emitter, Outcome, SmtScript, Solver};
use tenslift::sym::{eval, Elem, Rel, Term};

fn solver() -> Solver {
    Solver::from_env(Duration::from_secs(10))
}

#[test]
fn assert_false_is_unsat() {
    let mut s = SmtScript::new("QF_LRA");
    s.assert("false");
    assert_eq!(solver().check(&s).outcome, Outcome::Unsat);
}

#[test]
fn positive_witness() {
    let mut s = SmtScript::new("QF_LRA").with_model();
    s.declare_const("x", "Real");
    s.assert("(> x 0.0)");
    match solver().check(&s).outcome {
        Outcome::Sat(m) => assert!(m.values["x"] > int(0)),
        o => panic!("{:?}", o),
    }
}

#[test]
fn exp_axiom_shape() {
    let mut s = SmtScript::new("UFNRA");
    s.declare_fun("f_exp", &["Real"], "Real");
    s.assert("(forall ((v Real)) (> (f_exp v) 0.0))");
    s.declare_const("a", "Real");
    s.assert("(<= (f_exp a) 0.0)");
    let text = s.to_smt2();
    assert!(text.contains("(assert (forall ((v Real)) (> (f_exp v) 0.0)))"));
    assert_eq!(text, s.clone().to_smt2());
    assert_eq!(solver().check(&s).outcome, Outcome::Unsat);
}

#[test]
fn hard_query_times_out() {
    let mut s = SmtScript::new("QF_NIA");
    for v in ["x", "y", "z"] {
        s.declare_const(v, "Int");
    }
    s.assert("(= (+ (* x x x) (* y y y) (* z z z)) 33)");
    s.assert("(> (* x x) 1000000000000)");
    let timeout = Duration::from_secs(1);
    let start = Instant::now();
    let v = solver().with_timeout(timeout).check(&s);
    assert!(start.elapsed() <= timeout + Duration::from_secs(1), "{:?}", start.elapsed());
    assert_eq!(v.outcome, Outcome::Unknown("timeout".into()));
}

#[test]
fn unresponsive_process_is_killed() {
    let mut s = Solver::new("sleep", Duration::from_millis(300));
    s.args = vec!["30".into()];
    let start = Instant::now();
    let v = s.check(&SmtScript::new("QF_LRA"));
    assert!(start.elapsed() < Duration::from_millis(300) + Duration::from_secs(1));
    assert_eq!(v.outcome, Outcome::Unknown("timeout".into()));
}

fn linear(coeffs: &[i64], c: i64) -> Term {
    let mut items: Vec<Term> = coeffs
        .iter()
        .enumerate()
        .map(|(i, k)| Term::mul(&Term::int(*k), &Term::elem(0, i as u32)))
        .collect();
    items.push(Term::int(c));
    Term::sum(items)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Models substitute back into the asserted constraints.
    #[test]
    fn models_round_trip(rows in prop::collection::vec((prop::collection::vec(-5i64..=5, 3), -10i64..=10, 0usize..3), 1..5)) {
        let mut s = SmtScript::new("QF_LRA").with_model();
        for i in 0..3 {
            s.declare_const(&format!("x{}", i), "Real");
        }
        let rels = [Rel::Gt, Rel::Ge, Rel::Eq];
        let leaf = |e: Elem| format!("x{}", e.index);
        let mut constraints = Vec::new();
        for (coeffs, c, r) in &rows {
            let lhs = linear(coeffs, *c);
            let t = Term::cmp_rel(rels[*r], &lhs, &Term::zero());
            s.assert(Emitter::new(&leaf).emit(&t));
            constraints.push((rels[*r], lhs));
        }
        match solver().check(&s).outcome {
            Outcome::Sat(m) => {
                for (rel, lhs) in &constraints {
                    let v: Rational = eval(lhs, &|e| Some(m.values.get(&format!("x{}", e.index)).cloned().unwrap_or_else(|| int(0)))).unwrap();
                    prop_assert!(rel.holds(&v, &int(0)), "{:?} {} 0 fails at {:?}", lhs, rel.symbol(), m.values);
                }
            }
            Outcome::Unsat => {}
            o => prop_assert!(false, "{:?}", o),
        }
    }
}
