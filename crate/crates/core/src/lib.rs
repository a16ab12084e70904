//! Verified lifting of block/grid tensor kernels to high-level tensor formulas.

pub mod exec;
pub mod formula;
pub mod kernel;
pub mod pipeline;
pub mod scalar;
pub mod simplify;
pub mod smt;
pub mod sym;
pub mod synth;
pub mod tensor;
pub mod value;
pub mod verify;

pub use scalar::{MathFn, Rational, Scalar};
pub use formula::Formula;
pub use sym::{Elem, Term};
pub use tensor::Tensor;

/// Tensor of exact rationals.
pub type ExactTensor = Tensor<Rational>;
/// Tensor of machine doubles.
pub type FloatTensor = Tensor<f64>;
/// Tensor of symbolic terms.
pub type SymTensor = Tensor<Term>;

pub(crate) fn serde_secs<S: serde::Serializer>(d: &std::time::Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64((d.as_secs_f64() * 1000.0).round() / 1000.0)
}
