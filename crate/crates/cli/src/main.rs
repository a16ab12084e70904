//! Command-line front end: lift one kernel, run the corpus, or simplify a formula.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use tenslift::formula::parse_formula;
use tenslift::pipeline::{lift_file, load_corpus, run_corpus, CorpusFlags, LiftError, LiftOptions};
use tenslift::simplify::{simplify_with, SimplifyConfig};
use tenslift::smt::Solver;

const EXIT_SYNTH: u8 = 2;
const EXIT_PARSE: u8 = 3;

#[derive(Parser)]
#[command(name = "tenslift", version, about = "Lift tensor kernels to verified high-level formulas")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize, verify and simplify the formula of one kernel.
    Lift(LiftArgs),
    /// Operations over a kernel corpus.
    Corpus {
        #[command(subcommand)]
        cmd: CorpusCmd,
    },
    /// Simplify the formula in a file.
    Simplify(SimplifyArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// Per-stage time limit in seconds: synthesis budget and per-condition solver timeout.
    #[arg(long, value_name = "S")]
    timeout: Option<f64>,
    /// SMT-LIB2 solver binary (default: $TENSLIFT_SOLVER or z3).
    #[arg(long, value_name = "PATH")]
    solver: Option<PathBuf>,
}

impl SolverArgs {
    fn solver(&self) -> Solver {
        let t = self.timeout.map_or(Duration::from_secs(30), Duration::from_secs_f64);
        match &self.solver {
            Some(p) => Solver::new(p, t),
            None => Solver::from_env(t),
        }
    }
}

#[derive(Args)]
struct LiftArgs {
    file: PathBuf,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    no_verify: bool,
    /// Write each verification condition as an .smt2 file under DIR.
    #[arg(long, value_name = "DIR")]
    artifacts: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Lift every kernel and summarize.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Corpus directory with .klift files and manifest.toml.
    #[arg(long, default_value = "corpus")]
    dir: PathBuf,
    /// Disable top-down decomposition (bottom-up enumeration only).
    #[arg(long)]
    no_topdown: bool,
    /// Disable type and value pruning in bottom-up enumeration.
    #[arg(long)]
    no_prune: bool,
    /// Verify with the array template only, without the thread-pattern abstraction.
    #[arg(long)]
    no_verify_pattern: bool,
    #[arg(long)]
    no_verify: bool,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    workers: Option<usize>,
    /// Only these kernels (file stems).
    #[arg(long, value_name = "NAME")]
    only: Vec<String>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SimplifyArgs {
    file: PathBuf,
    /// Input shape, e.g. `x=4x8`; a bare name (`eps=`) is a scalar.
    #[arg(long, value_name = "NAME=DIMS")]
    shape: Vec<String>,
}

fn parse_shape(s: &str) -> Result<(String, Vec<usize>), String> {
    let (name, dims) = s.split_once('=').ok_or_else(|| format!("bad shape '{}': expected NAME=DIMS", s))?;
    let dims = if dims.is_empty() {
        Vec::new()
    } else {
        dims.split('x').map(|d| d.parse::<usize>().map_err(|e| format!("bad dimension '{}': {}", d, e))).collect::<Result<_, _>>()?
    };
    Ok((name.to_string(), dims))
}

fn main() -> ExitCode {
    env_logger::init();
    match Cli::parse().cmd {
        Cmd::Lift(a) => lift(a),
        Cmd::Corpus { cmd: CorpusCmd::Run(a) } => corpus(a),
        Cmd::Simplify(a) => simplify(a),
    }
}

fn lift(a: LiftArgs) -> ExitCode {
    let mut opts = LiftOptions { solver: a.solver.solver(), ..LiftOptions::default() };
    if let Some(t) = a.solver.timeout {
        opts.synth.time_budget = Duration::from_secs_f64(t);
    }
    if a.no_verify {
        opts.verify = None;
    } else if let Some(v) = opts.verify.as_mut() {
        v.vc_timeout = opts.solver.timeout;
        v.artifacts = a.artifacts.clone();
    }
    let report = match lift_file(&a.file, &opts) {
        Ok(r) => r,
        Err(e @ LiftError::Parse(_)) => {
            eprintln!("{}", e);
            return ExitCode::from(EXIT_PARSE);
        }
        Err(e) => {
            eprintln!("{}", e);
            return ExitCode::FAILURE;
        }
    };
    if a.json {
        println!("{}", report.to_json());
    } else {
        let s = &report.synthesis;
        println!("kernel      {}", report.kernel);
        match &s.formula {
            Some(f) => println!("formula     {}", f),
            None => println!("synthesis   failed: {}", s.reason.as_deref().unwrap_or("")),
        }
        if let Some(v) = &report.verification {
            let detail = match &v.verdict {
                tenslift::verify::VerifyVerdict::Verified => v.invariant.map(|i| i.to_string()).unwrap_or_default(),
                tenslift::verify::VerifyVerdict::Refuted { witness } => format!("{:?}", witness),
                tenslift::verify::VerifyVerdict::Unknown { reason, vc } => format!("{} {}", reason, vc.as_deref().unwrap_or("")),
            };
            println!("verified    {} {}", v.verdict.label(), detail.trim());
            for vc in &v.vcs {
                println!("  {:<20} {:<8} {:.3}s", vc.id, vc.result, vc.time.as_secs_f64());
            }
        }
        if let Some(f) = &report.simplified {
            println!("simplified  {}", f);
        }
        if let Some(d) = &report.differential {
            println!(
                "difftest    {} ({} trials, max rel error {:.3e})",
                if d.passed { "pass" } else { "FAIL" },
                d.trials,
                d.max_rel_error
            );
        }
        for n in &report.notes {
            println!("note        {}", n);
        }
    }
    if report.synthesized() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_SYNTH)
    }
}

fn corpus(a: RunArgs) -> ExitCode {
    let corpus = match load_corpus(&a.dir) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", e);
            return ExitCode::from(EXIT_PARSE);
        }
    };
    let mut flags = CorpusFlags {
        no_topdown: a.no_topdown,
        no_prune: a.no_prune,
        no_verify_pattern: a.no_verify_pattern,
        no_verify: a.no_verify,
        solver: Some(a.solver.solver()),
        only: a.only,
        ..CorpusFlags::default()
    };
    if let Some(t) = a.solver.timeout {
        flags.synth_budget = Duration::from_secs_f64(t);
        flags.vc_timeout = Duration::from_secs_f64(t);
    }
    if let Some(w) = a.workers {
        flags.workers = w;
    }
    let report = run_corpus(&corpus, &flags);
    if a.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.table());
    }
    let missing = report.kernels.iter().any(|k| k.expected_synth && !k.report.synthesized());
    if missing {
        ExitCode::from(EXIT_SYNTH)
    } else {
        ExitCode::SUCCESS
    }
}

fn simplify(a: SimplifyArgs) -> ExitCode {
    let text = match std::fs::read_to_string(&a.file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {}", a.file.display(), e);
            return ExitCode::FAILURE;
        }
    };
    let f = match parse_formula(text.trim()) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{}: {}", a.file.display(), e);
            return ExitCode::from(EXIT_PARSE);
        }
    };
    let mut shapes = BTreeMap::new();
    for s in &a.shape {
        match parse_shape(s) {
            Ok((n, d)) => {
                shapes.insert(n, d);
            }
            Err(e) => {
                eprintln!("{}", e);
                return ExitCode::FAILURE;
            }
        }
    }
    match simplify_with(&f, &SimplifyConfig { shapes, ..SimplifyConfig::default() }) {
        Ok(s) => {
            println!("{}", s.formula);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e);
            ExitCode::FAILURE
        }
    }
}
