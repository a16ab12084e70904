//! Equality saturation over tensor formulas: rewrite rules grow an e-graph of
//! equivalent forms, and the cheapest form is extracted.

mod egraph;
mod rules;

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Signed;
use serde::Serialize;
use thiserror::Error;

use crate::formula::{infer_shape, Formula, NamedConst, F};
use crate::scalar::rational_to_f64;

pub use egraph::{op_of, Data, EClass, EGraph, ENode, Id, Op, Sign};
pub use rules::{default_rules, parse_rules, Guard, GuardKind, Pattern, Rule, RuleParseError, Subst, DEFAULT_RULES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub iterations: usize,
    pub nodes: usize,
}

impl Default for Limits {
    fn default() -> Limits {
        Limits { iterations: 30, nodes: 50_000 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SaturationStats {
    pub iterations: usize,
    pub nodes: usize,
    pub classes: usize,
    /// False when a limit stopped saturation before a fixpoint.
    pub saturated: bool,
}

/// Per-iteration match cap before a rule is banned; bans double on each repeat.
const MATCH_LIMIT: usize = 1_000;
const BAN_LENGTH: usize = 5;

/// Runs every rule to a fixpoint or until a limit is hit. Rewrites that would change
/// a class's shape are discarded. Rules that match too often are backed off for a few
/// iterations, and a fixpoint only counts once no rule is banned.
pub fn saturate(g: &mut EGraph, rules: &[&Rule], limits: Limits) -> SaturationStats {
    let mut iterations = 0;
    let mut saturated = false;
    let mut banned_until = vec![0usize; rules.len()];
    let mut times_banned = vec![0u32; rules.len()];
    while iterations < limits.iterations {
        iterations += 1;
        let mut found = Vec::new();
        let ids = g.class_ids();
        for (r, rule) in rules.iter().enumerate() {
            if banned_until[r] > iterations {
                continue;
            }
            let limit = MATCH_LIMIT << times_banned[r];
            let mut hits = Vec::new();
            for &id in &ids {
                for s in rule.lhs.search(g, id) {
                    if rule.guards.iter().all(|gd| gd.holds(g, &s)) {
                        hits.push((r, id, s));
                    }
                }
                if hits.len() > limit {
                    break;
                }
            }
            if hits.len() > limit {
                banned_until[r] = iterations + (BAN_LENGTH << times_banned[r]);
                times_banned[r] += 1;
                continue;
            }
            found.extend(hits);
        }
        let mut changed = false;
        for (r, id, s) in found {
            if g.memo_len() >= limits.nodes {
                break;
            }
            let rhs = rules[r].rhs.instantiate(g, &s);
            if g.class(rhs).data.shape == g.class(id).data.shape {
                changed |= g.union(id, rhs);
            }
        }
        g.rebuild();
        if g.memo_len() >= limits.nodes {
            break;
        }
        if !changed {
            if banned_until.iter().all(|&b| b <= iterations) {
                saturated = true;
                break;
            }
            // Nothing else can fire; lift the bans early.
            for b in banned_until.iter_mut() {
                *b = (*b).min(iterations + 1);
            }
        }
    }
    SaturationStats { iterations, nodes: g.num_nodes(), classes: g.num_classes(), saturated }
}

/// Unit weight per node, with named constants cheaper than a literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    pub node: u64,
    pub named: u64,
}

impl Default for CostModel {
    fn default() -> CostModel {
        CostModel { node: 2, named: 1 }
    }
}

impl CostModel {
    fn op(&self, op: &Op) -> u64 {
        match op {
            Op::Named(_) => self.named,
            _ => self.node,
        }
    }

    pub fn cost(&self, f: &Formula) -> u64 {
        let (op, kids) = op_of(f);
        self.op(&op) + kids.into_iter().map(|k| self.cost(k)).sum::<u64>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimplifyError {
    #[error("class {0} has no finite extraction")]
    NoFiniteTerm(Id),
    #[error("formula is ill-typed under the given shapes: {0}")]
    Shape(String),
}

/// Minimum-cost tree rooted at `root`; ties go to the lower constructor rank, then to
/// the smaller node.
pub fn extract(g: &EGraph, root: Id, cost: &CostModel) -> Result<F, SimplifyError> {
    let ids = g.class_ids();
    let mut best: BTreeMap<Id, (u64, ENode)> = BTreeMap::new();
    let mut changed = true;
    while changed {
        changed = false;
        for &id in &ids {
            for n in &g.class(id).nodes {
                let Some(kids) = n.children.iter().map(|&c| best.get(&g.find(c)).map(|b| b.0)).collect::<Option<Vec<u64>>>() else {
                    continue;
                };
                let c = cost.op(&n.op) + kids.iter().sum::<u64>();
                let better = match best.get(&id) {
                    None => true,
                    Some((bc, bn)) => (c, n.op.rank(), n) < (*bc, bn.op.rank(), bn),
                };
                if better {
                    best.insert(id, (c, n.clone()));
                    changed = true;
                }
            }
        }
    }
    fn build(g: &EGraph, best: &BTreeMap<Id, (u64, ENode)>, id: Id) -> Result<F, SimplifyError> {
        let id = g.find(id);
        let (_, n) = best.get(&id).ok_or(SimplifyError::NoFiniteTerm(id))?;
        let kids = n.children.iter().map(|&c| build(g, best, c)).collect::<Result<Vec<_>, _>>()?;
        Ok(n.to_formula(&kids))
    }
    build(g, &best, root)
}

/// Relative tolerance for recognizing a named constant in a literal.
pub const RECOVER_TOL: f64 = 1e-7;

/// Replaces literals within `tol` of a known mathematical constant by the constant.
pub fn recover_constants(f: &Formula, tol: f64) -> F {
    let recovered = |c: &crate::scalar::Rational| {
        let v = rational_to_f64(&c.abs());
        let named = NamedConst::ALL.into_iter().find(|n| (v - n.value()).abs() <= tol * n.value())?;
        let node = Formula::named(named);
        Some(if c.is_negative() { Formula::neg(node) } else { node })
    };
    match f {
        Formula::Const(c) => recovered(c).unwrap_or_else(|| Formula::constant(c.clone())),
        _ => {
            let (op, kids) = op_of(f);
            let kids: Vec<F> = kids.into_iter().map(|k| recover_constants(k, tol)).collect();
            ENode::leaf(op).to_formula(&kids)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplifyConfig {
    pub limits: Limits,
    pub cost: CostModel,
    pub tol: f64,
    /// Input shapes; probed from the formula when empty.
    pub shapes: BTreeMap<String, Vec<usize>>,
    /// Inputs known to be strictly positive, e.g. from kernel assumptions.
    pub positive: BTreeSet<String>,
    /// Also run rules marked `trusted`.
    pub trusted: bool,
    /// Replaces the built-in rule set.
    pub rules: Option<Vec<Rule>>,
}

impl Default for SimplifyConfig {
    fn default() -> SimplifyConfig {
        SimplifyConfig {
            limits: Limits::default(),
            cost: CostModel::default(),
            tol: RECOVER_TOL,
            shapes: BTreeMap::new(),
            positive: BTreeSet::new(),
            trusted: false,
            rules: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Simplified {
    pub formula: F,
    pub cost_before: u64,
    pub cost_after: u64,
    pub stats: SaturationStats,
}

/// Shapes under which `f` type-checks, tried from most to least structured.
pub fn probe_shapes(f: &Formula) -> Option<BTreeMap<String, Vec<usize>>> {
    let mut names = BTreeSet::new();
    f.inputs(&mut names);
    [vec![6, 8], vec![8, 8], vec![8], vec![]].into_iter().find_map(|d| {
        let shapes: BTreeMap<String, Vec<usize>> = names.iter().map(|n| (n.clone(), d.clone())).collect();
        infer_shape(f, &|n| shapes.get(n).cloned()).ok().map(|_| shapes)
    })
}

pub fn simplify(f: &Formula) -> Result<Simplified, SimplifyError> {
    simplify_with(f, &SimplifyConfig::default())
}

/// Constant recovery, saturation, then extraction.
pub fn simplify_with(f: &Formula, cfg: &SimplifyConfig) -> Result<Simplified, SimplifyError> {
    let shapes = if cfg.shapes.is_empty() {
        probe_shapes(f).ok_or_else(|| SimplifyError::Shape("no probe shape type-checks".into()))?
    } else {
        cfg.shapes.clone()
    };
    infer_shape(f, &|n| shapes.get(n).cloned()).map_err(|e| SimplifyError::Shape(e.to_string()))?;
    let start = recover_constants(f, cfg.tol);
    let positive = if cfg.trusted { cfg.positive.clone() } else { BTreeSet::new() };
    let mut g = EGraph::new(shapes, positive);
    let root = g.add_formula(&start);
    g.rebuild();
    let owned;
    let all = match &cfg.rules {
        Some(r) => r,
        None => {
            owned = default_rules();
            &owned
        }
    };
    let rules: Vec<&Rule> = all.iter().filter(|r| cfg.trusted || !r.trusted).collect();
    let stats = saturate(&mut g, &rules, cfg.limits);
    let formula = extract(&g, root, &cfg.cost)?;
    Ok(Simplified { cost_before: cfg.cost.cost(f), cost_after: cfg.cost.cost(&formula), formula, stats })
}
