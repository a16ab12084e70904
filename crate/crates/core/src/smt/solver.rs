use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num_traits::Zero;
use serde::Serialize;
use wait_timeout::ChildExt;

use super::script::SmtScript;
use super::sexp::{parse_sexps, Sexp};
use crate::scalar::{parse_decimal, Rational};

/// Values of the nullary real/int symbols in a model. Function interpretations are
/// kept only as raw text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Model {
    pub values: BTreeMap<String, Rational>,
    pub functions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Sat(Model),
    Unsat,
    Unknown(String),
    Crash(String),
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Sat(_) => "sat",
            Outcome::Unsat => "unsat",
            Outcome::Unknown(_) => "unknown",
            Outcome::Crash(_) => "crash",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub time: Duration,
}

/// An SMT-LIB2 solver binary fed over stdin, one fresh process per check.
#[derive(Debug, Clone, Serialize)]
pub struct Solver {
    pub path: PathBuf,
    pub args: Vec<String>,
    #[serde(skip)]
    pub timeout: Duration,
}

/// Extra time past the timeout before the process is killed.
const GRACE: Duration = Duration::from_millis(500);

impl Solver {
    pub fn new(path: impl Into<PathBuf>, timeout: Duration) -> Solver {
        Solver { path: path.into(), args: vec!["-in".into(), "-smt2".into()], timeout }
    }

    /// `TENSLIFT_SOLVER` (default `z3`) and `TENSLIFT_SOLVER_ARGS` (default `-in -smt2`).
    pub fn from_env(timeout: Duration) -> Solver {
        let mut s = Solver::new(std::env::var("TENSLIFT_SOLVER").unwrap_or_else(|_| "z3".into()), timeout);
        if let Ok(args) = std::env::var("TENSLIFT_SOLVER_ARGS") {
            s.args = args.split_whitespace().map(String::from).collect();
        }
        s
    }

    pub fn with_timeout(&self, timeout: Duration) -> Solver {
        Solver { timeout, ..self.clone() }
    }

    pub fn check(&self, script: &SmtScript) -> Verdict {
        let start = Instant::now();
        let mut outcome = self.run(script);
        let time = start.elapsed();
        // Solvers that honor `:timeout` just answer `unknown`.
        if matches!(outcome, Outcome::Unknown(_)) && time + Duration::from_millis(50) >= self.timeout {
            outcome = Outcome::Unknown("timeout".into());
        }
        Verdict { outcome, time }
    }

    fn run(&self, script: &SmtScript) -> Outcome {
        let mut child = match Command::new(&self.path)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
        {
            Ok(c) => c,
            Err(e) => return Outcome::Crash(format!("solver not found: {}: {}", self.path.display(), e)),
        };
        let mut stdin = child.stdin.take().unwrap();
        let text = format!("(set-option :timeout {})\n{}", self.timeout.as_millis().max(1), script.to_smt2());
        let mut stdout = child.stdout.take().unwrap();
        let reader = std::thread::spawn(move || {
            let mut out = String::new();
            let _ = stdout.read_to_string(&mut out);
            out
        });
        // A solver that dies early closes the pipe; the exit status reports it.
        let _ = stdin.write_all(text.as_bytes());
        drop(stdin);
        let status = match child.wait_timeout(self.timeout + GRACE) {
            Ok(Some(status)) => Some(status),
            Ok(None) => {
                let _ = child.kill();
                let _ = child.wait();
                None
            }
            Err(e) => return Outcome::Crash(format!("waiting for solver: {}", e)),
        };
        let out = reader.join().unwrap_or_default();
        let Some(status) = status else { return Outcome::Unknown("timeout".into()) };
        let mut stderr = String::new();
        if let Some(mut e) = child.stderr.take() {
            let _ = e.read_to_string(&mut stderr);
        }
        parse_output(&out, script.produce_model, status.success(), &stderr)
    }
}

fn parse_output(out: &str, want_model: bool, success: bool, stderr: &str) -> Outcome {
    let sexps = match parse_sexps(out) {
        Ok(s) => s,
        Err(e) => return Outcome::Crash(format!("malformed solver output ({}): {}", e, out.trim())),
    };
    let mut items = sexps.iter().filter(|s| !matches!(s, Sexp::Atom(a) if a == "success"));
    let first = items.next();
    if let Some(Sexp::List(xs)) = first {
        if xs.first().and_then(Sexp::atom) == Some("error") {
            return Outcome::Crash(format!("solver error: {}", first.unwrap()));
        }
    }
    match first.and_then(Sexp::atom) {
        Some("unsat") => Outcome::Unsat,
        Some("unknown") | Some("timeout") => Outcome::Unknown(if out.contains("timeout") { "timeout".into() } else { "unknown".into() }),
        Some("sat") => {
            if !want_model {
                return Outcome::Sat(Model::default());
            }
            match items.next().map(parse_model) {
                Some(Ok(m)) => Outcome::Sat(m),
                Some(Err(e)) => Outcome::Crash(format!("malformed model: {}", e)),
                None => Outcome::Crash("sat without a model".into()),
            }
        }
        _ if !success => Outcome::Crash(format!("solver exited with failure: {}{}", out.trim(), stderr.trim())),
        _ => Outcome::Crash(format!("unexpected solver output: {}", out.trim())),
    }
}

fn parse_model(s: &Sexp) -> Result<Model, String> {
    let mut items = s.list().ok_or("model is not a list")?;
    if items.first().and_then(Sexp::atom) == Some("model") {
        items = &items[1..];
    }
    let mut model = Model::default();
    for def in items {
        let parts = def.list().ok_or("model entry is not a list")?;
        if parts.len() != 5 || parts[0].atom() != Some("define-fun") {
            continue;
        }
        let name = parts[1].atom().ok_or("bad symbol")?.to_string();
        let arity = parts[2].list().map_or(0, |a| a.len());
        if arity > 0 || !matches!(parts[3].atom(), Some("Real") | Some("Int")) {
            model.functions.insert(name, parts[4].to_string());
            continue;
        }
        match value(&parts[4]) {
            Some(v) => {
                model.values.insert(name, v);
            }
            None => {
                model.functions.insert(name, parts[4].to_string());
            }
        }
    }
    Ok(model)
}

/// Numeric model values: numerals, `(- v)`, `(/ a b)`.
fn value(s: &Sexp) -> Option<Rational> {
    match s {
        Sexp::Atom(a) => parse_decimal(a),
        Sexp::List(xs) => match (xs.first()?.atom()?, xs.len()) {
            ("-", 2) => Some(-value(&xs[1])?),
            ("/", 3) => {
                let d = value(&xs[2])?;
                if d.is_zero() {
                    None
                } else {
                    Some(value(&xs[1])? / d)
                }
            }
            _ => None,
        },
    }
}
