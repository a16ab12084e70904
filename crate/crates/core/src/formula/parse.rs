use num_bigint::BigInt;
use thiserror::Error;

use super::{BinOp, Formula, NamedConst, RedOp, F};
use crate::scalar::{parse_decimal, MathFn, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("column {col}: {message}")]
pub struct FormulaParseError {
    /// 1-based character column.
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Sym(char),
    End,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, FormulaParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push((Tok::Ident(chars[start..i].iter().collect()), start + 1));
        } else if c.is_ascii_digit() || c == '.' {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            toks.push((Tok::Num(chars[start..i].iter().collect()), start + 1));
        } else if "+-*/@(),".contains(c) {
            toks.push((Tok::Sym(c), start + 1));
            i += 1;
        } else {
            return Err(FormulaParseError { col: start + 1, message: format!("unexpected character '{}'", c) });
        }
    }
    toks.push((Tok::End, chars.len() + 1));
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }
    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].0
    }
    fn col(&self) -> usize {
        self.toks[self.pos].1
    }
    fn err<T>(&self, message: impl Into<String>) -> Result<T, FormulaParseError> {
        Err(FormulaParseError { col: self.col(), message: message.into() })
    }
    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }
    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.next();
            true
        } else {
            false
        }
    }
    fn expect(&mut self, c: char) -> Result<(), FormulaParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{}'", c))
        }
    }

    fn expr(&mut self) -> Result<F, FormulaParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = Formula::bin(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<F, FormulaParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Sym('*') => {
                    self.next();
                    lhs = Formula::bin(BinOp::Mul, lhs, self.unary()?);
                }
                Tok::Sym('/') => {
                    self.next();
                    lhs = Formula::bin(BinOp::Div, lhs, self.unary()?);
                }
                Tok::Sym('@') => {
                    self.next();
                    lhs = Formula::matmul(lhs, self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<F, FormulaParseError> {
        if self.eat('-') {
            if let Tok::Num(_) = self.peek() {
                let r = self.number()?;
                return Ok(Formula::constant(-r));
            }
            return Ok(Formula::neg(self.unary()?));
        }
        self.atom()
    }

    fn number(&mut self) -> Result<Rational, FormulaParseError> {
        match self.next() {
            Tok::Num(s) => parse_decimal(&s).map_or_else(|| self.err(format!("bad number '{}'", s)), Ok),
            _ => self.err("expected a number"),
        }
    }

    fn integer(&mut self) -> Result<BigInt, FormulaParseError> {
        let neg = self.eat('-');
        let r = self.number()?;
        if !r.is_integer() {
            return self.err("expected an integer");
        }
        let n = r.to_integer();
        Ok(if neg { -n } else { n })
    }

    fn args(&mut self, n: usize) -> Result<Vec<F>, FormulaParseError> {
        self.expect('(')?;
        let mut out = Vec::new();
        for i in 0..n {
            if i > 0 {
                self.expect(',')?;
            }
            out.push(self.expr()?);
        }
        self.expect(')')?;
        Ok(out)
    }

    fn atom(&mut self) -> Result<F, FormulaParseError> {
        match self.peek().clone() {
            Tok::Num(_) => Ok(Formula::constant(self.number()?)),
            Tok::Sym('(') => {
                self.next();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let call = *self.peek_at(1) == Tok::Sym('(');
                if name == "log2" && self.peek_at(2) == &Tok::Ident("e".into()) {
                    self.next();
                    self.next();
                    self.next();
                    self.expect(')')?;
                    return Ok(Formula::named(NamedConst::Log2E));
                }
                if name == "ln" && self.peek_at(2) == &Tok::Num("2".into()) {
                    self.next();
                    self.next();
                    self.next();
                    self.expect(')')?;
                    return Ok(Formula::named(NamedConst::Ln2));
                }
                self.next();
                if !call {
                    if let Some(c) = NamedConst::ALL.iter().find(|c| c.token() == name) {
                        return Ok(Formula::named(*c));
                    }
                    return Ok(Formula::input(&name));
                }
                if let Some(g) = MathFn::from_name(&name) {
                    let a = self.args(1)?;
                    return Ok(Formula::apply(g, a[0].clone()));
                }
                match name.as_str() {
                    "sum" | "max" => {
                        let op = if name == "sum" { RedOp::Sum } else { RedOp::Max };
                        let a = self.args(1)?;
                        Ok(Formula::reduce(op, a[0].clone()))
                    }
                    "transpose" => Ok(Formula::permute(self.args(1)?[0].clone())),
                    "ifpos" => {
                        let a = self.args(3)?;
                        Ok(Formula::if_pos(a[0].clone(), a[1].clone(), a[2].clone()))
                    }
                    "rat" => {
                        self.expect('(')?;
                        let n = self.integer()?;
                        self.expect(',')?;
                        let d = self.integer()?;
                        self.expect(')')?;
                        if d == BigInt::from(0) {
                            return self.err("zero denominator");
                        }
                        Ok(Formula::constant(Rational::new(n, d)))
                    }
                    _ => self.err(format!("unknown function '{}'", name)),
                }
            }
            Tok::End => self.err("unexpected end of formula"),
            Tok::Sym(c) => self.err(format!("unexpected '{}'", c)),
        }
    }
}

/// Parses the text syntax produced by `Display`.
pub fn parse_formula(src: &str) -> Result<F, FormulaParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    #[test]
    fn precedence_and_associativity() {
        let f = parse_formula("a - b - c * d / e2").unwrap();
        assert_eq!(f.to_string(), "a - b - c * d / e2");
        let g = parse_formula("a - (b - c)").unwrap();
        assert_eq!(g.to_string(), "a - (b - c)");
        assert_eq!(parse_formula("-(2)").unwrap().to_string(), "-(2)");
        assert_eq!(*parse_formula("-2").unwrap(), Formula::Const(ratio(-2, 1)));
    }

    #[test]
    fn named_constants_and_calls() {
        let f = parse_formula("x * log2(e) + ln(2) * sqrt_2_over_pi - ifpos(x, exp(x), rat(1, 3))").unwrap();
        assert_eq!(f.to_string(), "x * log2(e) + ln(2) * sqrt_2_over_pi - ifpos(x, exp(x), rat(1, 3))");
        let g = parse_formula("transpose(k) @ v / sum(max(q))").unwrap();
        assert_eq!(g.to_string(), "transpose(k) @ v / sum(max(q))");
    }

    #[test]
    fn errors_have_columns() {
        let e = parse_formula("x + ").unwrap_err();
        assert_eq!(e.col, 5);
        assert!(parse_formula("foo(x)").unwrap_err().message.contains("unknown function"));
        assert!(parse_formula("x $").is_err());
    }
}
