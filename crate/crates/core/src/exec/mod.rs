//! Kernel execution: a domain-generic thread interpreter, the bounded
//! concrete/symbolic domain, shape binding and the synthesis specification.

mod bounded;
mod engine;
mod shape;
mod spec;

use thiserror::Error;

use crate::scalar::DomainError;

pub use bounded::{execute, execute_in_order, run_concrete, Bounded, ConcreteInputs};
pub use engine::{Domain, Thread};
pub use shape::{default_shape, ShapeEnv};
pub use spec::{LiftSpec, SymbolicTensor};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("out-of-bounds access {tensor}[{index}] (length {len})")]
    OutOfBounds { tensor: String, index: i64, len: usize },
    #[error("threads {first} and {second} both write {tensor}[{index}]; threads must be effect-disjoint")]
    DoubleWrite { tensor: String, index: usize, first: usize, second: usize },
    #[error("output element {tensor}[{index}] is never written")]
    NeverWritten { tensor: String, index: usize },
    #[error("{0}")]
    Type(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}
