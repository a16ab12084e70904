//! Hash-consed symbolic scalar terms over input-tensor elements.

mod eval;
mod term;

pub use eval::{elem_leaves, eval, functions, has_fn, leaves, substitute, EvalError, LeafSet};
pub use term::{Elem, Rel, Term, TermDisplay, TermKind};
