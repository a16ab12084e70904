use num_traits::Signed;

use super::{KBinOp, KExpr, KernelModule, ParamKind, SizeExpr, Stmt};
use crate::scalar::format_rational;

pub fn print_kernel(k: &KernelModule) -> String {
    let params: Vec<String> = k
        .params
        .iter()
        .map(|p| match p.kind {
            ParamKind::TensorIn | ParamKind::TensorOut => {
                let dims: Vec<String> = p.dims.iter().map(print_size).collect();
                let kind = if p.kind == ParamKind::TensorIn { "in" } else { "out" };
                format!("{}: {}[{}]", p.name, kind, dims.join(", "))
            }
            ParamKind::ScalarInt => match &p.defined_as {
                Some(e) => format!("{}: int = {}", p.name, print_size(e)),
                None => format!("{}: int", p.name),
            },
            ParamKind::ScalarReal => match &p.assume {
                Some((rel, v)) => format!("{}: real {} {}", p.name, rel.symbol(), print_real(v)),
                None => format!("{}: real", p.name),
            },
        })
        .collect();
    let mut out = format!(
        "kernel {}({}) grid({}) block({})",
        k.name,
        params.join(", "),
        print_size(&k.grid_expr),
        k.block_size
    );
    if let Some(live) = &k.live {
        out.push_str(&format!(" live({})", print_size(live)));
    }
    out.push_str(" {\n");
    for s in &k.body {
        out.push_str("    ");
        out.push_str(&print_stmt(s));
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

pub fn print_stmt(s: &Stmt) -> String {
    match s {
        Stmt::Assign(name, e) => format!("{} = {}", name, print_expr(e)),
        Stmt::Store(a, v) => format!("store({}, {})", print_expr(a), print_expr(v)),
    }
}

fn print_real(v: &crate::scalar::Rational) -> String {
    let s = format_rational(&v.abs());
    let s = if s.contains('.') || s.contains('/') { s } else { format!("{}.0", s) };
    if v.is_negative() {
        format!("-{}", s)
    } else {
        s
    }
}

fn prec(e: &KExpr) -> u8 {
    match e {
        KExpr::Cmp(..) => 1,
        KExpr::Bin(KBinOp::Add | KBinOp::Sub, ..) => 2,
        KExpr::Bin(..) => 3,
        KExpr::Neg(_) => 4,
        _ => 5,
    }
}

pub fn print_expr(e: &KExpr) -> String {
    let wrap = |child: &KExpr, min: u8| {
        let s = print_expr(child);
        if prec(child) < min {
            format!("({})", s)
        } else {
            s
        }
    };
    match e {
        KExpr::Var(n) => n.clone(),
        KExpr::ProgramId => "program_id".to_string(),
        KExpr::BlockSize => "BLOCK_SIZE".to_string(),
        KExpr::Int(v) => v.to_string(),
        KExpr::Real(r) => print_real(r),
        KExpr::Arange(a, b) => format!("arange({}, {})", print_expr(a), print_expr(b)),
        KExpr::Load(a) => format!("load({})", print_expr(a)),
        KExpr::Bin(op, a, b) => {
            let p = prec(e);
            format!("{} {} {}", wrap(a, p), op.symbol(), wrap(b, p + 1))
        }
        KExpr::Neg(a) => format!("-{}", wrap(a, 4)),
        KExpr::Math(f, a) => format!("{}({})", f, print_expr(a)),
        KExpr::Reduce(op, a) => format!("{}({})", op.name(), print_expr(a)),
        KExpr::Where(c, a, b) => format!("where({}, {}, {})", print_expr(c), print_expr(a), print_expr(b)),
        KExpr::Cmp(rel, a, b) => format!("{} {} {}", wrap(a, 2), rel.symbol(), wrap(b, 2)),
    }
}

pub fn print_size(e: &SizeExpr) -> String {
    fn p(e: &SizeExpr) -> u8 {
        match e {
            SizeExpr::Add(..) | SizeExpr::Sub(..) => 2,
            SizeExpr::Mul(..) | SizeExpr::Div(..) => 3,
            _ => 5,
        }
    }
    let wrap = |c: &SizeExpr, min: u8| {
        let s = print_size(c);
        if p(c) < min {
            format!("({})", s)
        } else {
            s
        }
    };
    match e {
        SizeExpr::Lit(v) => v.to_string(),
        SizeExpr::Param(n) => n.clone(),
        SizeExpr::Block => "BLOCK_SIZE".to_string(),
        SizeExpr::Add(a, b) => format!("{} + {}", wrap(a, 2), wrap(b, 3)),
        SizeExpr::Sub(a, b) => format!("{} - {}", wrap(a, 2), wrap(b, 3)),
        SizeExpr::Mul(a, b) => format!("{} * {}", wrap(a, 3), wrap(b, 4)),
        SizeExpr::Div(a, b) => format!("{} / {}", wrap(a, 3), wrap(b, 4)),
    }
}
