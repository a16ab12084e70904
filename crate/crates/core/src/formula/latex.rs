use num_traits::Signed;

use super::{BinOp, Formula, RedOp};
use crate::scalar::{format_rational, MathFn};

pub(super) fn to_latex(f: &Formula) -> String {
    let mut out = String::new();
    write(f, 0, &mut out);
    out
}

fn group(f: &Formula, out: &mut String) {
    out.push_str("\\left(");
    write(f, 0, out);
    out.push_str("\\right)");
}

fn write(f: &Formula, min: u8, out: &mut String) {
    match f {
        Formula::Input(n) => {
            let escaped = n.replace('_', "\\_");
            if n.chars().count() > 1 {
                out.push_str(&format!("\\mathit{{{}}}", escaped));
            } else {
                out.push_str(&escaped);
            }
        }
        Formula::Const(c) => {
            let s = if c.is_integer() || !format_rational(c).contains('/') {
                format_rational(&c.abs())
            } else {
                format!("\\frac{{{}}}{{{}}}", c.numer().abs(), c.denom())
            };
            if c.is_negative() {
                out.push_str(&format!("\\left(-{}\\right)", s));
            } else {
                out.push_str(&s);
            }
        }
        Formula::Named(c) => out.push_str(c.latex()),
        Formula::Neg(a) => {
            out.push('-');
            write(a, 3, out);
        }
        Formula::Fn(g, a) => match g {
            MathFn::Sqrt => {
                out.push_str("\\sqrt{");
                write(a, 0, out);
                out.push('}');
            }
            MathFn::Abs => {
                out.push_str("\\left|");
                write(a, 0, out);
                out.push_str("\\right|");
            }
            _ => {
                out.push_str(&format!("\\{}", g.name()));
                group(a, out);
            }
        },
        Formula::Reduce(op, a) => {
            out.push_str(match op {
                RedOp::Sum => "\\sum_{j}",
                RedOp::Max => "\\max_{j}",
            });
            group(a, out);
        }
        Formula::Permute(a) => {
            out.push('{');
            write(a, 4, out);
            out.push_str("}^{\\top}");
        }
        Formula::IfPos(c, a, b) => {
            out.push_str("\\begin{cases} ");
            write(a, 0, out);
            out.push_str(" & ");
            write(c, 0, out);
            out.push_str(" > 0 \\\\ ");
            write(b, 0, out);
            out.push_str(" & \\text{otherwise} \\end{cases}");
        }
        Formula::Bin(BinOp::Div, a, b) => {
            out.push_str("\\frac{");
            write(a, 0, out);
            out.push_str("}{");
            write(b, 0, out);
            out.push('}');
        }
        Formula::Bin(_, a, b) | Formula::MatMul(a, b) => {
            let (p, sym) = match f {
                Formula::Bin(BinOp::Add, ..) => (1, " + "),
                Formula::Bin(BinOp::Sub, ..) => (1, " - "),
                Formula::Bin(_, ..) => (2, " \\cdot "),
                _ => (2, " \\, "),
            };
            let paren = min > p;
            if paren {
                out.push_str("\\left(");
            }
            write(a, p, out);
            out.push_str(sym);
            write(b, p + 1, out);
            if paren {
                out.push_str("\\right)");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::formula::parse_formula;

    #[test]
    fn softmax_latex() {
        let f = parse_formula("exp(x - max(x)) / sum(exp(x - max(x)))").unwrap();
        assert_eq!(
            f.to_latex(),
            "\\frac{\\exp\\left(x - \\max_{j}\\left(x\\right)\\right)}{\\sum_{j}\\left(\\exp\\left(x - \\max_{j}\\left(x\\right)\\right)\\right)}"
        );
        let g = parse_formula("transpose(q_k) @ v").unwrap();
        assert_eq!(g.to_latex(), "{\\mathit{q\\_k}}^{\\top} \\, v");
    }
}
