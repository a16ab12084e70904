use serde_json::{json, Value as Json};

use super::shape::ShapeEnv;
use crate::scalar::Rational;
use crate::sym::{Rel, Term};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct SymbolicTensor {
    /// Parameter position in the kernel signature.
    pub param: u32,
    pub name: String,
    pub dims: Vec<usize>,
    pub elems: Vec<Term>,
}

impl SymbolicTensor {
    pub fn to_tensor(&self) -> Tensor<Term> {
        Tensor::new(self.dims.clone(), self.elems.clone())
    }
}

/// Synthesis specification: symbolic inputs and per-element output terms.
#[derive(Debug, Clone)]
pub struct LiftSpec {
    pub kernel: String,
    /// Parameter names by position, for rendering terms.
    pub names: Vec<String>,
    /// Tensor-in parameters, then scalar-real parameters as 0-d tensors, in parameter order.
    pub inputs: Vec<SymbolicTensor>,
    pub outputs: Vec<SymbolicTensor>,
    pub block_size: u32,
    pub live: usize,
    pub env: ShapeEnv,
    /// Declared assumptions on real parameters, by parameter position.
    pub real_assumptions: Vec<(u32, (Rel, Rational))>,
}

impl LiftSpec {
    pub fn input(&self, name: &str) -> Option<&SymbolicTensor> {
        self.inputs.iter().find(|t| t.name == name)
    }

    /// Debug dump: tensor name to array of rendered terms.
    pub fn to_json(&self) -> Json {
        let render = |t: &SymbolicTensor| {
            json!({
                "dims": t.dims,
                "elems": t.elems.iter().map(|e| e.display(&self.names).to_string()).collect::<Vec<_>>(),
            })
        };
        let mut outputs = serde_json::Map::new();
        for t in &self.outputs {
            outputs.insert(t.name.clone(), render(t));
        }
        let mut inputs = serde_json::Map::new();
        for t in &self.inputs {
            inputs.insert(t.name.clone(), json!({ "dims": t.dims }));
        }
        json!({
            "kernel": self.kernel,
            "block_size": self.block_size,
            "live": self.live,
            "grid": self.env.grid,
            "inputs": inputs,
            "outputs": outputs,
        })
    }
}
