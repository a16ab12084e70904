//! Dense row-major tensors with numpy-style broadcasting.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<V> {
    pub dims: Vec<usize>,
    pub data: Vec<V>,
}

impl<V: Clone> Tensor<V> {
    pub fn new(dims: Vec<usize>, data: Vec<V>) -> Tensor<V> {
        assert_eq!(dims.iter().product::<usize>(), data.len(), "tensor data/dims mismatch");
        Tensor { dims, data }
    }

    pub fn scalar(v: V) -> Tensor<V> {
        Tensor { dims: vec![], data: vec![v] }
    }

    pub fn from_fn(dims: Vec<usize>, f: impl FnMut(usize) -> V) -> Tensor<V> {
        let n = dims.iter().product();
        Tensor { dims, data: (0..n).map(f).collect() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn map<W>(&self, f: impl FnMut(&V) -> W) -> Tensor<W> {
        Tensor { dims: self.dims.clone(), data: self.data.iter().map(f).collect() }
    }

    pub fn try_map<W, E>(&self, f: impl FnMut(&V) -> Result<W, E>) -> Result<Tensor<W>, E> {
        Ok(Tensor { dims: self.dims.clone(), data: self.data.iter().map(f).collect::<Result<_, _>>()? })
    }

    /// Element at a multi-index of a broadcast result with dims `out_dims`.
    pub fn get_broadcast(&self, out_index: &[usize]) -> &V {
        let offset = out_index.len() - self.dims.len();
        let mut flat = 0;
        for (axis, &d) in self.dims.iter().enumerate() {
            let i = if d == 1 { 0 } else { out_index[axis + offset] };
            flat = flat * d + i;
        }
        &self.data[flat]
    }
}

/// numpy broadcasting of two shapes.
pub fn broadcast(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let n = a.len().max(b.len());
    let mut out = vec![0; n];
    for i in 0..n {
        let da = if i + a.len() >= n { a[i + a.len() - n] } else { 1 };
        let db = if i + b.len() >= n { b[i + b.len() - n] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Whether `from` broadcasts to exactly `to`.
pub fn broadcasts_to(from: &[usize], to: &[usize]) -> bool {
    broadcast(from, to).as_deref() == Some(to)
}

/// Row-major multi-index of flat position `flat` in `dims`.
pub fn unravel(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for axis in (0..dims.len()).rev() {
        idx[axis] = flat % dims[axis];
        flat /= dims[axis];
    }
    idx
}

/// Expands `t` to `dims` by broadcasting.
pub fn expand<V: Clone>(t: &Tensor<V>, dims: &[usize]) -> Option<Tensor<V>> {
    if !broadcasts_to(&t.dims, dims) {
        return None;
    }
    if t.dims == dims {
        return Some(t.clone());
    }
    Some(Tensor::from_fn(dims.to_vec(), |i| t.get_broadcast(&unravel(i, dims)).clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broadcasting_rules() {
        assert_eq!(broadcast(&[2, 4], &[2, 1]), Some(vec![2, 4]));
        assert_eq!(broadcast(&[], &[3]), Some(vec![3]));
        assert_eq!(broadcast(&[4], &[2, 4]), Some(vec![2, 4]));
        assert_eq!(broadcast(&[3], &[4]), None);
        assert!(broadcasts_to(&[2, 1], &[2, 4]));
        assert!(!broadcasts_to(&[2, 4], &[2, 1]));
    }

    #[test]
    fn expand_row_column() {
        let t = Tensor::new(vec![2, 1], vec![10, 20]);
        let e = expand(&t, &[2, 3]).unwrap();
        assert_eq!(e.data, vec![10, 10, 10, 20, 20, 20]);
        assert_eq!(unravel(5, &[2, 3]), vec![1, 2]);
    }
}
