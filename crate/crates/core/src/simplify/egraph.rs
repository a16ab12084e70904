use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::{Signed, Zero};

use crate::formula::{infer_shape, BinOp, Formula, NamedConst, RedOp, F};
use crate::scalar::{MathFn, Rational};

pub type Id = usize;

/// E-node operator. Ordering is the constructor order used to break extraction ties.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Input(String),
    Const(Rational),
    Named(NamedConst),
    Neg,
    Fn(MathFn),
    Bin(BinOp),
    Reduce(RedOp),
    Permute,
    MatMul,
    IfPos,
}

impl Op {
    /// Constructor order for extraction ties: subtraction and division come first, so
    /// they end up outermost, above reductions and products.
    pub fn rank(&self) -> u8 {
        match self {
            Op::Input(_) => 0,
            Op::Const(_) => 1,
            Op::Named(_) => 2,
            Op::Neg => 3,
            Op::Fn(_) => 4,
            Op::Bin(BinOp::Sub) => 5,
            Op::Bin(BinOp::Div) => 6,
            Op::Reduce(_) => 7,
            Op::Permute => 8,
            Op::MatMul => 9,
            Op::IfPos => 10,
            Op::Bin(BinOp::Add) => 11,
            Op::Bin(BinOp::Mul) => 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ENode {
    pub op: Op,
    pub children: Vec<Id>,
}

impl ENode {
    pub fn leaf(op: Op) -> ENode {
        ENode { op, children: Vec::new() }
    }

    /// Rebuilds a one-level formula around already-built children.
    pub fn to_formula(&self, kids: &[F]) -> F {
        let k = |i: usize| kids[i].clone();
        match &self.op {
            Op::Input(n) => Formula::input(n),
            Op::Const(c) => Formula::constant(c.clone()),
            Op::Named(c) => Formula::named(*c),
            Op::Neg => Formula::neg(k(0)),
            Op::Fn(g) => Formula::apply(*g, k(0)),
            Op::Bin(op) => Formula::bin(*op, k(0), k(1)),
            Op::Reduce(op) => Formula::reduce(*op, k(0)),
            Op::Permute => Formula::permute(k(0)),
            Op::MatMul => Formula::matmul(k(0), k(1)),
            Op::IfPos => Formula::if_pos(k(0), k(1), k(2)),
        }
    }
}

/// Splits a formula node into its operator and children.
pub fn op_of(f: &Formula) -> (Op, Vec<&F>) {
    let op = match f {
        Formula::Input(n) => Op::Input(n.clone()),
        Formula::Const(c) => Op::Const(c.clone()),
        Formula::Named(c) => Op::Named(*c),
        Formula::Neg(_) => Op::Neg,
        Formula::Fn(g, _) => Op::Fn(*g),
        Formula::Bin(op, ..) => Op::Bin(*op),
        Formula::Reduce(op, _) => Op::Reduce(*op),
        Formula::Permute(_) => Op::Permute,
        Formula::MatMul(..) => Op::MatMul,
        Formula::IfPos(..) => Op::IfPos,
    };
    (op, f.children())
}

/// Sign facts; joining two facts about the same value keeps both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Sign {
    pub nonzero: bool,
    pub nonneg: bool,
}

impl Sign {
    pub const POSITIVE: Sign = Sign { nonzero: true, nonneg: true };

    pub fn positive(self) -> bool {
        self.nonzero && self.nonneg
    }

    fn of(c: &Rational) -> Sign {
        Sign { nonzero: !c.is_zero(), nonneg: !c.is_negative() }
    }

    fn join(self, o: Sign) -> Sign {
        Sign { nonzero: self.nonzero || o.nonzero, nonneg: self.nonneg || o.nonneg }
    }
}

/// Per-class analysis data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Data {
    /// `None` when ill-typed under the bound input shapes.
    pub shape: Option<Vec<usize>>,
    pub konst: Option<Rational>,
    pub sign: Sign,
}

impl Data {
    /// Last axis of length one (or a scalar): constant along every reduced row.
    pub fn row_invariant(&self) -> bool {
        self.shape.as_ref().is_some_and(|s| s.last().map_or(true, |&d| d == 1))
    }
}

#[derive(Debug, Clone)]
pub struct EClass {
    pub nodes: Vec<ENode>,
    parents: Vec<(ENode, Id)>,
    pub data: Data,
}

#[derive(Debug, Clone)]
pub struct EGraph {
    uf: Vec<Id>,
    classes: Vec<Option<EClass>>,
    memo: HashMap<ENode, Id>,
    pending: Vec<Id>,
    shapes: BTreeMap<String, Vec<usize>>,
    positive: BTreeSet<String>,
}

const PLACEHOLDERS: [&str; 3] = ["#0", "#1", "#2"];

impl EGraph {
    /// An empty graph over inputs with the given shapes; `positive` names inputs known
    /// to be strictly positive.
    pub fn new(shapes: BTreeMap<String, Vec<usize>>, positive: BTreeSet<String>) -> EGraph {
        EGraph {
            uf: Vec::new(),
            classes: Vec::new(),
            memo: HashMap::new(),
            pending: Vec::new(),
            shapes,
            positive,
        }
    }

    pub fn find(&self, mut id: Id) -> Id {
        while self.uf[id] != id {
            id = self.uf[id];
        }
        id
    }

    fn find_mut(&mut self, id: Id) -> Id {
        let root = self.find(id);
        let mut cur = id;
        while self.uf[cur] != root {
            let next = self.uf[cur];
            self.uf[cur] = root;
            cur = next;
        }
        root
    }

    pub fn class(&self, id: Id) -> &EClass {
        self.classes[self.find(id)].as_ref().expect("canonical class")
    }

    pub fn class_ids(&self) -> Vec<Id> {
        (0..self.classes.len()).filter(|&i| self.classes[i].is_some()).collect()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.iter().flatten().count()
    }

    pub fn num_nodes(&self) -> usize {
        self.classes.iter().flatten().map(|c| c.nodes.len()).sum()
    }

    /// Size of the hashcons; an O(1) upper bound on live e-nodes.
    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    pub fn canonicalize(&self, n: &ENode) -> ENode {
        ENode { op: n.op.clone(), children: n.children.iter().map(|&c| self.find(c)).collect() }
    }

    pub fn lookup(&self, n: &ENode) -> Option<Id> {
        self.memo.get(&self.canonicalize(n)).map(|&id| self.find(id))
    }

    fn make(&self, n: &ENode) -> Data {
        let kid = |i: usize| &self.class(n.children[i]).data;
        let shape = match &n.op {
            Op::Input(name) => self.shapes.get(name).cloned(),
            Op::Const(_) | Op::Named(_) => Some(Vec::new()),
            _ => {
                let kids: Option<Vec<Vec<usize>>> = (0..n.children.len()).map(|i| kid(i).shape.clone()).collect();
                kids.and_then(|kids| {
                    let f = n.to_formula(&PLACEHOLDERS.iter().map(|p| Formula::input(p)).collect::<Vec<_>>());
                    let look = |p: &str| PLACEHOLDERS.iter().position(|q| *q == p).and_then(|i| kids.get(i).cloned());
                    infer_shape(&f, &look).ok()
                })
            }
        };
        let konst = match (&n.op, n.children.len()) {
            (Op::Const(c), _) => Some(c.clone()),
            (Op::Neg, _) => kid(0).konst.as_ref().map(|c| -c),
            (Op::Bin(op), _) => match (&kid(0).konst, &kid(1).konst) {
                (Some(a), Some(b)) => match op {
                    BinOp::Add => Some(a + b),
                    BinOp::Sub => Some(a - b),
                    BinOp::Mul => Some(a * b),
                    BinOp::Div => (!b.is_zero()).then(|| a / b),
                },
                _ => None,
            },
            _ => None,
        };
        let s = |i: usize| kid(i).sign;
        let none = Sign::default();
        let sign = match &n.op {
            Op::Const(c) => Sign::of(c),
            Op::Named(_) => Sign::POSITIVE,
            Op::Input(name) if self.positive.contains(name) => Sign::POSITIVE,
            Op::Input(_) => none,
            Op::Neg => Sign { nonzero: s(0).nonzero, nonneg: false },
            Op::Fn(MathFn::Exp) => Sign::POSITIVE,
            Op::Fn(MathFn::Sqrt) => Sign { nonzero: s(0).positive(), nonneg: true },
            Op::Fn(MathFn::Abs) => Sign { nonzero: s(0).nonzero, nonneg: true },
            Op::Fn(MathFn::Tanh) => s(0),
            Op::Fn(_) => none,
            Op::Bin(BinOp::Add) => Sign {
                nonzero: (s(0).positive() && s(1).nonneg) || (s(0).nonneg && s(1).positive()),
                nonneg: s(0).nonneg && s(1).nonneg,
            },
            Op::Bin(BinOp::Sub) => none,
            Op::Bin(BinOp::Mul) | Op::Bin(BinOp::Div) => Sign {
                nonzero: s(0).nonzero && s(1).nonzero,
                nonneg: (s(0).nonneg && s(1).nonneg) || (s(0).positive() && s(1).positive()),
            },
            Op::Reduce(_) => Sign { nonzero: s(0).positive(), nonneg: s(0).nonneg },
            Op::Permute => s(0),
            Op::MatMul => Sign { nonzero: s(0).positive() && s(1).positive(), nonneg: s(0).nonneg && s(1).nonneg },
            Op::IfPos => Sign { nonzero: s(1).nonzero && s(2).nonzero, nonneg: s(1).nonneg && s(2).nonneg },
        };
        let sign = match &konst {
            Some(c) => sign.join(Sign::of(c)),
            None => sign,
        };
        Data { shape, konst, sign }
    }

    pub fn add(&mut self, n: ENode) -> Id {
        let n = self.canonicalize(&n);
        if let Some(&id) = self.memo.get(&n) {
            return self.find(id);
        }
        let id = self.uf.len();
        let data = self.make(&n);
        self.uf.push(id);
        for &c in &n.children {
            self.classes[c].as_mut().expect("canonical child").parents.push((n.clone(), id));
        }
        self.memo.insert(n.clone(), id);
        let folded = data.konst.clone().filter(|_| !matches!(n.op, Op::Const(_)));
        self.classes.push(Some(EClass { nodes: vec![n], parents: Vec::new(), data }));
        if let Some(c) = folded {
            let cid = self.add(ENode::leaf(Op::Const(c)));
            self.union(id, cid);
        }
        id
    }

    pub fn add_formula(&mut self, f: &Formula) -> Id {
        let (op, kids) = op_of(f);
        let children = kids.into_iter().map(|k| self.add_formula(k)).collect();
        self.add(ENode { op, children })
    }

    /// Merges two classes; returns whether they were distinct.
    pub fn union(&mut self, a: Id, b: Id) -> bool {
        let (mut a, mut b) = (self.find_mut(a), self.find_mut(b));
        if a == b {
            return false;
        }
        let (pa, pb) = (self.class(a).parents.len(), self.class(b).parents.len());
        if pa < pb {
            std::mem::swap(&mut a, &mut b);
        }
        self.uf[b] = a;
        let cb = self.classes[b].take().expect("canonical class");
        let ca = self.classes[a].as_mut().expect("canonical class");
        ca.nodes.extend(cb.nodes);
        ca.parents.extend(cb.parents);
        let joined = join(&ca.data, &cb.data);
        let changed = joined != ca.data;
        ca.data = joined;
        self.pending.push(a);
        if changed {
            let ps: Vec<Id> = ca.parents.iter().map(|p| p.1).collect();
            self.pending.extend(ps);
        }
        true
    }

    /// Restores congruence closure and the hashcons invariant.
    pub fn rebuild(&mut self) {
        while !self.pending.is_empty() {
            let mut todo: Vec<Id> = std::mem::take(&mut self.pending).into_iter().map(|i| self.find(i)).collect();
            todo.sort_unstable();
            todo.dedup();
            for c in todo {
                self.repair(c);
            }
        }
        for id in self.class_ids() {
            let mut nodes = std::mem::take(&mut self.classes[id].as_mut().unwrap().nodes);
            for n in &mut nodes {
                *n = self.canonicalize(n);
            }
            nodes.sort();
            nodes.dedup();
            self.classes[id].as_mut().unwrap().nodes = nodes;
        }
    }

    fn repair(&mut self, id: Id) {
        let id = self.find(id);
        let Some(class) = self.classes[id].as_mut() else { return };
        let parents = std::mem::take(&mut class.parents);
        for (n, _) in &parents {
            self.memo.remove(n);
        }
        let mut seen: HashMap<ENode, Id> = HashMap::new();
        for (n, p) in parents {
            let n = self.canonicalize(&n);
            if let Some(&prev) = seen.get(&n) {
                self.union(prev, p);
            }
            let p = self.find(p);
            self.memo.insert(n.clone(), p);
            seen.insert(n, p);
        }
        let id = self.find(id);
        let fresh: Vec<(ENode, Id)> = seen.into_iter().map(|(n, p)| (n, self.find(p))).collect();
        for (n, p) in &fresh {
            let data = self.make(n);
            let class = self.classes[*p].as_mut().expect("canonical parent");
            let joined = join(&class.data, &data);
            if joined != class.data {
                class.data = joined;
                self.pending.push(*p);
            }
        }
        let mut fresh = fresh;
        fresh.sort();
        self.classes[id].as_mut().expect("canonical class").parents.extend(fresh);
    }

    /// Every canonical node is owned by exactly one class, which the hashcons agrees on.
    pub fn is_congruent(&self) -> bool {
        let mut owner: HashMap<ENode, Id> = HashMap::new();
        for id in self.class_ids() {
            for n in &self.classes[id].as_ref().unwrap().nodes {
                let n = self.canonicalize(n);
                if let Some(&o) = owner.get(&n) {
                    if o != id {
                        return false;
                    }
                }
                if self.memo.get(&n).map(|&m| self.find(m)) != Some(id) {
                    return false;
                }
                owner.insert(n, id);
            }
        }
        true
    }
}

fn join(a: &Data, b: &Data) -> Data {
    Data {
        shape: a.shape.clone().or_else(|| b.shape.clone()),
        konst: a.konst.clone().or_else(|| b.konst.clone()),
        sign: a.sign.join(b.sign),
    }
}
