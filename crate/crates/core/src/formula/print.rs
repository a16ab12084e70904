use num_traits::Signed;

use super::{BinOp, Formula};
use crate::scalar::{format_rational, Rational};

const ADD: u8 = 1;
const MUL: u8 = 2;
const UNARY: u8 = 3;

pub(super) fn to_text(f: &Formula) -> String {
    let mut out = String::new();
    write(f, 0, &mut out);
    out
}

pub(super) fn const_text(c: &Rational) -> String {
    if !c.is_integer() && format_rational(c).contains('/') {
        return format!("rat({}, {})", c.numer(), c.denom());
    }
    let s = format_rational(c);
    if c.is_negative() {
        format!("({})", s)
    } else {
        s
    }
}

fn bin_prec(op: BinOp) -> u8 {
    match op {
        BinOp::Add | BinOp::Sub => ADD,
        BinOp::Mul | BinOp::Div => MUL,
    }
}

fn write(f: &Formula, min: u8, out: &mut String) {
    let call = |name: &str, args: &[&Formula], out: &mut String| {
        out.push_str(name);
        out.push('(');
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write(a, 0, out);
        }
        out.push(')');
    };
    match f {
        Formula::Input(n) => out.push_str(n),
        Formula::Const(c) => out.push_str(&const_text(c)),
        Formula::Named(c) => out.push_str(c.token()),
        Formula::Neg(a) => {
            let paren = min > UNARY;
            if paren {
                out.push('(');
            }
            out.push('-');
            if matches!(**a, Formula::Const(_)) {
                out.push('(');
                write(a, 0, out);
                out.push(')');
            } else {
                write(a, UNARY, out);
            }
            if paren {
                out.push(')');
            }
        }
        Formula::Fn(g, a) => call(g.name(), &[a], out),
        Formula::Reduce(op, a) => call(op.name(), &[a], out),
        Formula::Permute(a) => call("transpose", &[a], out),
        Formula::IfPos(c, a, b) => call("ifpos", &[c, a, b], out),
        Formula::Bin(_, a, b) | Formula::MatMul(a, b) => {
            let (p, sym) = match f {
                Formula::Bin(op, ..) => (bin_prec(*op), op.symbol()),
                _ => (MUL, "@"),
            };
            let paren = min > p;
            if paren {
                out.push('(');
            }
            write(a, p, out);
            out.push(' ');
            out.push_str(sym);
            out.push(' ');
            write(b, p + 1, out);
            if paren {
                out.push(')');
            }
        }
    }
}
