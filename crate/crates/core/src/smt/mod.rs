//! SMT-LIB2 scripts, term emission, and an external solver driver.

mod emit;
mod script;
mod sexp;
mod solver;

pub use emit::{emit_rel, fn_symbol, rational_literal, Emitter};
pub use script::SmtScript;
pub use sexp::{parse_sexps, Sexp};
pub use solver::{Model, Outcome, Solver, Verdict};
