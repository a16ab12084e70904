use std::collections::BTreeSet;

use super::{key, Synth};
use crate::formula::{BinOp, Formula, RedOp, F};
use crate::scalar::MathFn;
use crate::sym::{Rel, Term, TermKind};
use crate::tensor::Tensor;

/// Root operator a tensor can be split by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitOp {
    Add,
    Mul,
    Div,
    Neg,
    Fn(MathFn),
    /// `ite(a > b, t, e)`.
    Ite,
}

/// Shape of a sum recognized in every element.
#[derive(Debug, Clone, PartialEq)]
pub enum SumShape {
    /// Row sum over the argument tensor (last axis grows from 1 to the addend count).
    Plain(Tensor<Term>),
    /// `a @ b`.
    Dot(Tensor<Term>, Tensor<Term>),
}

fn root(t: &Term) -> Option<SplitOp> {
    Some(match t.kind() {
        TermKind::Add(_) => SplitOp::Add,
        TermKind::Mul(_) => SplitOp::Mul,
        TermKind::Div(..) => SplitOp::Div,
        TermKind::Neg(_) => SplitOp::Neg,
        TermKind::Fn(f, _) => SplitOp::Fn(*f),
        TermKind::Ite(c, ..) if matches!(c.kind(), TermKind::Cmp(Rel::Gt, ..)) => SplitOp::Ite,
        _ => return None,
    })
}

/// Family of an addend: kind rank plus the function symbol, if any.
fn family(t: &Term) -> (u8, Option<MathFn>) {
    let rank = match t.kind() {
        TermKind::Elem(_) => 0,
        TermKind::Fn(..) => 1,
        TermKind::Neg(_) => 2,
        TermKind::Mul(_) => 3,
        TermKind::Div(..) => 4,
        TermKind::Add(_) => 5,
        TermKind::Sub(..) => 6,
        TermKind::Ite(..) => 7,
        TermKind::Cmp(..) => 8,
        TermKind::Const(_) => 9,
    };
    let f = match t.kind() {
        TermKind::Fn(f, _) => Some(*f),
        _ => None,
    };
    (rank, f)
}

fn split_elem(t: &Term, op: SplitOp, by_family: bool) -> Option<Vec<Term>> {
    Some(match (op, t.kind()) {
        (SplitOp::Add, TermKind::Add(xs)) => {
            let mut at = 1;
            if by_family {
                let fam = family(&xs[0]);
                at = xs.iter().take_while(|x| family(x) == fam).count();
                if at == xs.len() {
                    at = 1;
                }
            }
            vec![Term::sum(xs[..at].to_vec()), Term::sum(xs[at..].to_vec())]
        }
        (SplitOp::Mul, TermKind::Mul(xs)) => vec![xs[0].clone(), Term::product(xs[1..].to_vec())],
        (SplitOp::Div, TermKind::Div(a, b)) => vec![a.clone(), b.clone()],
        (SplitOp::Neg, TermKind::Neg(a)) => vec![a.clone()],
        (SplitOp::Fn(g), TermKind::Fn(f, a)) if g == *f => vec![a.clone()],
        (SplitOp::Ite, TermKind::Ite(c, a, b)) => match c.kind() {
            TermKind::Cmp(Rel::Gt, l, r) => vec![Term::sub(l, r).canon(), a.clone(), b.clone()],
            _ => return None,
        },
        _ => return None,
    })
}

fn split_with(t: &Tensor<Term>, op: SplitOp, by_family: bool) -> Option<Vec<Tensor<Term>>> {
    let parts: Vec<Vec<Term>> = t.data.iter().map(|e| split_elem(e, op, by_family)).collect::<Option<_>>()?;
    let arity = parts.first()?.len();
    Some(
        (0..arity)
            .map(|k| Tensor::new(t.dims.clone(), parts.iter().map(|p| p[k].clone()).collect()))
            .collect(),
    )
}

/// Splits every element by its root `op`. `Add` and `Mul` chains split into the first
/// operand and the rest; `Ite` yields the condition `a - b`, then and else tensors.
/// `None` unless every element has root `op`.
pub fn split_by(t: &Tensor<Term>, op: SplitOp) -> Option<Vec<Tensor<Term>>> {
    split_with(t, op, false)
}

fn max_args(e: &Term) -> Option<Vec<Term>> {
    let mut items = Vec::new();
    let mut cur = e.clone();
    loop {
        let next = match cur.kind() {
            TermKind::Ite(c, a, b) => match c.kind() {
                TermKind::Cmp(Rel::Gt, x, y) if x == a && y == b => {
                    items.push(a.clone());
                    b.clone()
                }
                _ => break,
            },
            _ => break,
        };
        cur = next;
    }
    items.push(cur);
    (items.len() >= 2).then_some(items)
}

fn widen(dims: &[usize], n: usize) -> Vec<usize> {
    let mut d = dims.to_vec();
    *d.last_mut().unwrap() = n;
    d
}

/// Recognizes a row maximum: every element is a right-nested `ite(a > m, a, m)` chain.
fn guess_max(t: &Tensor<Term>) -> Option<Tensor<Term>> {
    if t.dims.last() != Some(&1) {
        return None;
    }
    let rows: Vec<Vec<Term>> = t.data.iter().map(max_args).collect::<Option<_>>()?;
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return None;
    }
    Some(Tensor::new(widen(&t.dims, n), rows.concat()))
}

fn addends(t: &Term) -> Option<&[Term]> {
    match t.kind() {
        TermKind::Add(xs) => Some(xs),
        _ => None,
    }
}

fn factor_pair(t: &Term) -> Option<(Term, Term)> {
    match t.kind() {
        TermKind::Mul(xs) if xs.len() == 2 && !xs[1].is_const() => Some((xs[0].clone(), xs[1].clone())),
        _ => None,
    }
}

/// Per element of a row (or column), the addends as factor pairs; then the factors
/// shared by every element, and for each element the partner of each shared factor.
fn dot_side(line: &[&Term]) -> Option<(Vec<Term>, Vec<Vec<Term>>)> {
    if line.len() < 2 {
        return None;
    }
    let pairs: Vec<Vec<(Term, Term)>> = line
        .iter()
        .map(|e| addends(e)?.iter().map(factor_pair).collect::<Option<Vec<_>>>())
        .collect::<Option<_>>()?;
    let k = pairs[0].len();
    if k < 2 || pairs.iter().any(|p| p.len() != k) {
        return None;
    }
    let sets: Vec<BTreeSet<Term>> =
        pairs.iter().map(|p| p.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect()).collect();
    let common: Vec<Term> = sets[0].iter().filter(|f| sets.iter().all(|s| s.contains(f))).cloned().collect();
    if common.len() != k {
        return None;
    }
    let mut partners = Vec::new();
    for p in &pairs {
        let mut row = Vec::with_capacity(k);
        for c in &common {
            let mut hits = p.iter().filter(|(a, b)| a == c || b == c);
            let (a, b) = hits.next()?;
            if hits.next().is_some() || (common.contains(a) && common.contains(b)) {
                return None;
            }
            row.push(if a == c { b.clone() } else { a.clone() });
        }
        partners.push(row);
    }
    Some((common, partners))
}

fn guess_dot(t: &Tensor<Term>) -> Option<(Tensor<Term>, Tensor<Term>)> {
    let [m, n] = t.dims[..] else { return None };
    // Row factors shared across columns form `a`.
    let a_first = || {
        let mut a = Vec::new();
        let mut b: Option<Vec<Vec<Term>>> = None;
        for i in 0..m {
            let line: Vec<&Term> = (0..n).map(|j| &t.data[i * n + j]).collect();
            let (common, partners) = dot_side(&line)?;
            match &b {
                Some(prev) if prev != &partners => return None,
                _ => b = Some(partners),
            }
            a.extend(common);
        }
        let b = b?;
        let k = b[0].len();
        Some((
            Tensor::new(vec![m, k], a),
            Tensor::from_fn(vec![k, n], |i| b[i % n][i / n].clone()),
        ))
    };
    let b_first = || {
        let mut cols = Vec::new();
        let mut a: Option<Vec<Vec<Term>>> = None;
        for j in 0..n {
            let line: Vec<&Term> = (0..m).map(|i| &t.data[i * n + j]).collect();
            let (common, partners) = dot_side(&line)?;
            match &a {
                Some(prev) if prev != &partners => return None,
                _ => a = Some(partners),
            }
            cols.push(common);
        }
        let a = a?;
        let k = a[0].len();
        Some((
            Tensor::from_fn(vec![m, k], |i| a[i / k][i % k].clone()),
            Tensor::from_fn(vec![k, n], |i| cols[i % n][i / n].clone()),
        ))
    };
    a_first().or_else(b_first)
}

fn guess_plain(t: &Tensor<Term>, live: usize) -> Option<Tensor<Term>> {
    if t.dims.last() != Some(&1) {
        return None;
    }
    let rows: Vec<&[Term]> = t.data.iter().map(addends).collect::<Option<_>>()?;
    let n = rows[0].len();
    let fam = family(&rows[0][0]);
    if n != live || rows.iter().any(|r| r.len() != n || r.iter().any(|x| family(x) != fam)) {
        return None;
    }
    Some(Tensor::new(widen(&t.dims, n), rows.concat()))
}

/// Recognizes a matrix product, then a row sum of `live` structurally parallel addends.
pub fn guess_sum(t: &Tensor<Term>, live: usize) -> Option<SumShape> {
    if let Some((a, b)) = guess_dot(t) {
        return Some(SumShape::Dot(a, b));
    }
    guess_plain(t, live).map(SumShape::Plain)
}

/// Collapses an axis along which every element is equal: the last axis to length 1,
/// or the first axis of a matrix.
fn compress(t: &Tensor<Term>) -> Option<Tensor<Term>> {
    let &n = t.dims.last()?;
    if n > 1 && t.data.chunks(n).all(|row| row.iter().all(|x| x == &row[0])) {
        return Some(Tensor::new(widen(&t.dims, 1), t.data.iter().step_by(n).cloned().collect()));
    }
    if let [m, c] = t.dims[..] {
        if m > 1 && (0..m).all(|i| t.data[i * c..(i + 1) * c] == t.data[..c]) {
            return Some(Tensor::new(vec![1, c], t.data[..c].to_vec()));
        }
    }
    None
}

impl Synth<'_> {
    pub(crate) fn solve_root(&mut self, t: &Tensor<Term>) -> Option<F> {
        self.solve_at(t, true)
    }

    pub(crate) fn solve(&mut self, t: &Tensor<Term>) -> Option<F> {
        self.solve_at(t, false)
    }

    fn solve_at(&mut self, t: &Tensor<Term>, is_root: bool) -> Option<F> {
        if self.expired() {
            return None;
        }
        let k = key(t);
        if let Some(r) = self.memo.get(&k) {
            return r.clone();
        }
        let r = self.solve_uncached(t, is_root);
        if !self.timed_out {
            self.memo.insert(k, r.clone());
        }
        r
    }

    fn solve_uncached(&mut self, t: &Tensor<Term>, is_root: bool) -> Option<F> {
        if let Some(f) = self.bottom_up(t, 0, 0) {
            return Some(f);
        }
        if let Some(c) = t.data[0].as_const() {
            if t.data.iter().all(|x| x == &t.data[0]) {
                return Some(Formula::constant(c.clone()));
            }
        }
        if let Some(c) = compress(t) {
            return self.solve(&c);
        }
        if let Some(arg) = guess_max(t) {
            if let Some(f) = self.solve(&arg) {
                return Some(Formula::reduce(RedOp::Max, f));
            }
        }
        if let Some((a, b)) = guess_dot(t) {
            if let (Some(fa), Some(fb)) = (self.solve(&a), self.solve(&b)) {
                return Some(Formula::matmul(fa, fb));
            }
        }
        if let Some(arg) = guess_plain(t, self.live) {
            if let Some(f) = self.solve(&arg) {
                return Some(Formula::reduce(RedOp::Sum, f));
            }
        }
        if let Some(f) = self.try_splits(t) {
            return Some(f);
        }
        let depth = if is_root { self.cfg.max_depth } else { self.cfg.leaf_depth };
        let f = self.bottom_up(t, 1, depth);
        if is_root && f.is_some() {
            self.root_bottom_up = true;
        }
        f
    }

    fn try_splits(&mut self, t: &Tensor<Term>) -> Option<F> {
        let op = root(&t.data[0])?;
        let mut options = vec![];
        if op == SplitOp::Add {
            options.extend(split_with(t, op, true));
        }
        if let Some(plain) = split_with(t, op, false) {
            if !options.contains(&plain) {
                options.push(plain);
            }
        }
        for parts in options {
            let mut fs = Vec::with_capacity(parts.len());
            for p in &parts {
                fs.push(self.solve(p)?);
                if self.timed_out {
                    return None;
                }
            }
            let Some(f) = (match (fs.len(), op) {
                (1, SplitOp::Neg) => Some(Formula::neg(fs[0].clone())),
                (1, SplitOp::Fn(g)) => Some(Formula::apply(g, fs[0].clone())),
                (2, SplitOp::Add) => Some(Formula::bin(BinOp::Add, fs[0].clone(), fs[1].clone())),
                (2, SplitOp::Mul) => Some(Formula::bin(BinOp::Mul, fs[0].clone(), fs[1].clone())),
                (2, SplitOp::Div) => Some(Formula::bin(BinOp::Div, fs[0].clone(), fs[1].clone())),
                (3, SplitOp::Ite) => Some(Formula::if_pos(fs[0].clone(), fs[1].clone(), fs[2].clone())),
                _ => None,
            }) else {
                continue;
            };
            return Some(f);
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: u32) -> Term {
        Term::elem(0, i)
    }

    #[test]
    fn compress_rows_and_columns() {
        let t = Tensor::new(vec![2, 2], vec![x(0), x(0), x(1), x(1)]);
        assert_eq!(compress(&t).unwrap(), Tensor::new(vec![2, 1], vec![x(0), x(1)]));
        let t = Tensor::new(vec![2, 2], vec![x(0), x(1), x(0), x(1)]);
        assert_eq!(compress(&t).unwrap().dims, vec![1, 2]);
        assert!(compress(&Tensor::new(vec![2], vec![x(0), x(1)])).is_none());
    }

    #[test]
    fn max_chain_arguments() {
        let items = [x(0), x(1), x(2)];
        assert_eq!(max_args(&Term::max_of(&items).unwrap()).unwrap(), items.to_vec());
        assert!(max_args(&x(0)).is_none());
    }
}
