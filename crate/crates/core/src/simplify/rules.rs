use std::collections::BTreeMap;

use thiserror::Error;

use super::egraph::{op_of, EGraph, ENode, Id, Op};
use crate::formula::{parse_formula, Formula};

/// A pattern over e-nodes; variables bind e-classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Var(String),
    Node(Op, Vec<Pattern>),
}

pub type Subst = BTreeMap<String, Id>;

impl Pattern {
    /// Every input name in `f` becomes a variable.
    pub fn from_formula(f: &Formula) -> Pattern {
        match op_of(f) {
            (Op::Input(n), _) => Pattern::Var(n),
            (op, kids) => Pattern::Node(op, kids.into_iter().map(|k| Pattern::from_formula(k)).collect()),
        }
    }

    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            Pattern::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Pattern::Node(_, kids) => kids.iter().for_each(|k| k.vars(out)),
        }
    }

    /// All substitutions under which the pattern matches class `id`.
    pub fn search(&self, g: &EGraph, id: Id) -> Vec<Subst> {
        let mut out = Vec::new();
        self.matches(g, id, Subst::new(), &mut out);
        out
    }

    fn matches(&self, g: &EGraph, id: Id, s: Subst, out: &mut Vec<Subst>) {
        let id = g.find(id);
        match self {
            Pattern::Var(v) => match s.get(v) {
                Some(&b) if g.find(b) != id => {}
                Some(_) => out.push(s),
                None => {
                    let mut s = s;
                    s.insert(v.clone(), id);
                    out.push(s);
                }
            },
            Pattern::Node(op, kids) => {
                for n in &g.class(id).nodes {
                    if n.op != *op || n.children.len() != kids.len() {
                        continue;
                    }
                    let mut partial = vec![s.clone()];
                    for (k, &c) in kids.iter().zip(&n.children) {
                        let mut next = Vec::new();
                        for p in partial {
                            k.matches(g, c, p, &mut next);
                        }
                        partial = next;
                        if partial.is_empty() {
                            break;
                        }
                    }
                    out.extend(partial);
                }
            }
        }
    }

    pub fn instantiate(&self, g: &mut EGraph, s: &Subst) -> Id {
        match self {
            Pattern::Var(v) => s[v],
            Pattern::Node(op, kids) => {
                let children = kids.iter().map(|k| k.instantiate(g, s)).collect();
                g.add(ENode { op: op.clone(), children })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardKind {
    NonZero,
    Positive,
    RowInvariant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Guard {
    pub kind: GuardKind,
    pub var: String,
}

impl Guard {
    pub fn holds(&self, g: &EGraph, s: &Subst) -> bool {
        let d = &g.class(s[&self.var]).data;
        match self.kind {
            GuardKind::NonZero => d.sign.nonzero,
            GuardKind::Positive => d.sign.positive(),
            GuardKind::RowInvariant => d.row_invariant(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub name: String,
    pub lhs: Pattern,
    pub rhs: Pattern,
    /// Formula forms of both sides, with variables as inputs.
    pub lhs_formula: crate::formula::F,
    pub rhs_formula: crate::formula::F,
    pub guards: Vec<Guard>,
    pub trusted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("rule line {line}: {message}")]
pub struct RuleParseError {
    pub line: usize,
    pub message: String,
}

/// Parses the rule text format; see `rules.txt`.
pub fn parse_rules(text: &str) -> Result<Vec<Rule>, RuleParseError> {
    let mut rules = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| RuleParseError { line: i + 1, message };
        let (name, body) = line.split_once(':').ok_or_else(|| err("missing ':'".into()))?;
        let name = name.trim().to_string();
        let (body, trusted) = match body.trim().strip_suffix("trusted") {
            Some(b) => (b.trim(), true),
            None => (body.trim(), false),
        };
        let (body, guard_text) = match body.split_once(" if ") {
            Some((b, g)) => (b, Some(g)),
            None => (body, None),
        };
        let (sides, both) = match body.split_once("<=>") {
            Some(s) => (s, true),
            None => (body.split_once("=>").ok_or_else(|| err("missing '=>'".into()))?, false),
        };
        let lhs = parse_formula(sides.0).map_err(|e| err(format!("lhs: {}", e)))?;
        let rhs = parse_formula(sides.1).map_err(|e| err(format!("rhs: {}", e)))?;
        let mut guards = Vec::new();
        for g in guard_text.into_iter().flat_map(|t| t.split("),")) {
            let g = g.trim().trim_end_matches(')');
            let (kind, var) = g.split_once('(').ok_or_else(|| err(format!("bad guard '{}'", g)))?;
            let kind = match kind.trim() {
                "nonzero" => GuardKind::NonZero,
                "positive" => GuardKind::Positive,
                "rowinv" => GuardKind::RowInvariant,
                k => return Err(err(format!("unknown guard '{}'", k))),
            };
            guards.push(Guard { kind, var: var.trim().to_string() });
        }
        let make = |name: String, l: &crate::formula::F, r: &crate::formula::F| -> Result<Rule, RuleParseError> {
            let (lp, rp) = (Pattern::from_formula(l), Pattern::from_formula(r));
            let (mut lv, mut rv) = (Vec::new(), Vec::new());
            lp.vars(&mut lv);
            rp.vars(&mut rv);
            if let Some(v) = rv.iter().chain(guards.iter().map(|g| &g.var)).find(|v| !lv.contains(v)) {
                return Err(err(format!("{}: variable {} is unbound on the left", name, v)));
            }
            if matches!(lp, Pattern::Var(_)) {
                return Err(err(format!("{}: left side is a bare variable", name)));
            }
            Ok(Rule { name, lhs: lp, rhs: rp, lhs_formula: l.clone(), rhs_formula: r.clone(), guards: guards.clone(), trusted })
        };
        rules.push(make(name.clone(), &lhs, &rhs)?);
        if both {
            rules.push(make(format!("{}-rev", name), &rhs, &lhs)?);
        }
    }
    Ok(rules)
}

pub const DEFAULT_RULES: &str = include_str!("rules.txt");

/// The built-in rule set.
pub fn default_rules() -> Vec<Rule> {
    parse_rules(DEFAULT_RULES).expect("built-in rules parse")
}
