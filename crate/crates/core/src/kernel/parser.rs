use std::collections::HashSet;
use std::fmt;

use super::lexer::{lex, Tok, Token};
use super::{KBinOp, KExpr, KernelModule, Param, ParamKind, RedOp, SizeExpr, Stmt};
use crate::scalar::{parse_decimal, MathFn};
use crate::sym::Rel;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Diagnostic {
        Diagnostic { line, col, message: message.into() }
    }

    /// `file:line:col: message`.
    pub fn render(&self, file: &str) -> String {
        format!("{}:{}:{}: {}", file, self.line, self.col, self.message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseErrors(pub Vec<Diagnostic>);

impl ParseErrors {
    pub fn render(&self, file: &str) -> String {
        self.0.iter().map(|d| d.render(file)).collect::<Vec<_>>().join("\n")
    }
}

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        f.write_str(&lines.join("\n"))
    }
}

pub fn parse_kernel(text: &str) -> Result<KernelModule, ParseErrors> {
    let tokens = lex(text).map_err(|d| ParseErrors(vec![d]))?;
    let mut p = Parser { tokens, pos: 0 };
    let (module, spans) = p.module().map_err(|d| ParseErrors(vec![d]))?;
    let errors = validate(&module, &spans);
    if errors.is_empty() {
        Ok(module)
    } else {
        Err(ParseErrors(errors))
    }
}

/// Source positions kept alongside the AST for semantic diagnostics.
struct Spans {
    params: Vec<(usize, usize)>,
    stmts: Vec<(usize, usize)>,
    header: (usize, usize),
    /// Identifier references: (name, line, col, statement index or None for header).
    refs: Vec<(String, usize, usize, Option<usize>)>,
    aranges: Vec<(usize, usize, KExpr, KExpr)>,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.tokens[self.pos];
        (t.line, t.col)
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let (line, col) = self.here();
        Err(Diagnostic::new(line, col, message))
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => format!("identifier {}", s),
            Tok::Int(v) => format!("integer {}", v),
            Tok::Real(s) => format!("number {}", s),
            Tok::Sym(s) => format!("'{}'", s),
            Tok::Newline => "end of line".to_string(),
            Tok::Eof => "end of file".to_string(),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == w)
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.is_sym(s) {
            self.next();
            Ok(())
        } else {
            self.error(format!("expected '{}', found {}", s, Self::describe(self.peek())))
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<()> {
        if self.is_word(w) {
            self.next();
            Ok(())
        } else {
            self.error(format!("expected '{}', found {}", w, Self::describe(self.peek())))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => self.error(format!("expected identifier, found {}", Self::describe(&other))),
        }
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek(), Tok::Newline) || self.is_sym(";") {
            self.next();
        }
    }

    fn module(&mut self) -> PResult<(KernelModule, Spans)> {
        self.skip_newlines();
        self.expect_word("kernel")?;
        let name = self.ident()?;
        let mut spans = Spans {
            params: vec![],
            stmts: vec![],
            header: self.here(),
            refs: vec![],
            aranges: vec![],
        };
        self.expect_sym("(")?;
        let mut params = Vec::new();
        loop {
            self.skip_newlines();
            if self.is_sym(")") {
                break;
            }
            spans.params.push(self.here());
            params.push(self.param(&mut spans)?);
            self.skip_newlines();
            if !self.is_sym(",") {
                break;
            }
            self.next();
        }
        self.skip_newlines();
        self.expect_sym(")")?;
        let mut grid = None;
        let mut block = None;
        let mut live = None;
        loop {
            self.skip_newlines();
            spans.header = self.here();
            if self.is_word("grid") {
                self.next();
                self.expect_sym("(")?;
                grid = Some(self.size_expr(&mut spans)?);
                self.expect_sym(")")?;
            } else if self.is_word("block") {
                self.next();
                self.expect_sym("(")?;
                match self.peek().clone() {
                    Tok::Int(v) if v >= 1 => {
                        self.next();
                        block = Some(v as u32)
                    }
                    other => return self.error(format!("block size must be a positive integer, found {}", Self::describe(&other))),
                }
                self.expect_sym(")")?;
            } else if self.is_word("live") {
                self.next();
                self.expect_sym("(")?;
                live = Some(self.size_expr(&mut spans)?);
                self.expect_sym(")")?;
            } else {
                break;
            }
        }
        let grid_expr = match grid {
            Some(g) => g,
            None => return self.error("missing grid(...) annotation"),
        };
        let block_size = match block {
            Some(b) => b,
            None => return self.error("missing block(...) annotation"),
        };
        self.expect_sym("{")?;
        let mut body = Vec::new();
        loop {
            self.skip_newlines();
            if self.is_sym("}") {
                self.next();
                break;
            }
            if matches!(self.peek(), Tok::Eof) {
                return self.error("unterminated kernel body, expected '}'");
            }
            spans.stmts.push(self.here());
            let idx = body.len();
            body.push(self.stmt(&mut spans, idx)?);
            if !matches!(self.peek(), Tok::Newline) && !self.is_sym(";") && !self.is_sym("}") {
                return self.error(format!("expected end of statement, found {}", Self::describe(self.peek())));
            }
        }
        self.skip_newlines();
        if !matches!(self.peek(), Tok::Eof) {
            return self.error("one kernel per file; unexpected text after '}'");
        }
        Ok((KernelModule { name, params, block_size, grid_expr, live, body }, spans))
    }

    fn param(&mut self, spans: &mut Spans) -> PResult<Param> {
        let name = self.ident()?;
        self.expect_sym(":")?;
        let (line, col) = self.here();
        let kind_word = self.ident()?;
        let mut param = Param { name: name.clone(), kind: ParamKind::ScalarInt, dims: vec![], defined_as: None, assume: None };
        match kind_word.as_str() {
            "in" | "out" => {
                param.kind = if kind_word == "in" { ParamKind::TensorIn } else { ParamKind::TensorOut };
                if !self.is_sym("[") {
                    return Err(Diagnostic::new(line, col, format!("missing shape annotation for tensor {}", name)));
                }
                self.next();
                loop {
                    param.dims.push(self.size_expr(spans)?);
                    if self.is_sym(",") {
                        self.next();
                        continue;
                    }
                    break;
                }
                self.expect_sym("]")?;
            }
            "int" => {
                if self.is_sym("=") {
                    self.next();
                    param.defined_as = Some(self.size_expr(spans)?);
                }
            }
            "real" => {
                param.kind = ParamKind::ScalarReal;
                let rel = if self.is_sym(">") {
                    Some(Rel::Gt)
                } else if self.is_sym(">=") {
                    Some(Rel::Ge)
                } else {
                    None
                };
                if let Some(rel) = rel {
                    self.next();
                    let value = match self.next().tok {
                        Tok::Int(v) => crate::scalar::int(v),
                        Tok::Real(s) => parse_decimal(&s).expect("lexer yields valid decimals"),
                        other => return Err(Diagnostic::new(line, col, format!("expected number in assumption, found {}", Self::describe(&other)))),
                    };
                    param.assume = Some((rel, value));
                }
            }
            other => {
                return Err(Diagnostic::new(
                    line,
                    col,
                    format!("unknown parameter kind {} (expected in, out, int or real)", other),
                ))
            }
        }
        Ok(param)
    }

    fn size_expr(&mut self, spans: &mut Spans) -> PResult<SizeExpr> {
        let (line, col) = self.here();
        let e = self.expr(spans, None)?;
        to_size(&e).ok_or_else(|| Diagnostic::new(line, col, "size expressions may only use integers, int parameters, BLOCK_SIZE and + - * /"))
    }

    fn stmt(&mut self, spans: &mut Spans, idx: usize) -> PResult<Stmt> {
        if self.is_word("store") {
            self.next();
            self.expect_sym("(")?;
            let addr = self.expr(spans, Some(idx))?;
            self.expect_sym(",")?;
            let value = self.expr(spans, Some(idx))?;
            self.expect_sym(")")?;
            return Ok(Stmt::Store(addr, value));
        }
        let name = self.ident()?;
        if matches!(name.as_str(), "program_id" | "BLOCK_SIZE") {
            return self.error(format!("cannot assign to {}", name));
        }
        self.expect_sym("=")?;
        let value = self.expr(spans, Some(idx))?;
        Ok(Stmt::Assign(name, value))
    }

    fn expr(&mut self, spans: &mut Spans, stmt: Option<usize>) -> PResult<KExpr> {
        let lhs = self.additive(spans, stmt)?;
        let rel = match self.peek() {
            Tok::Sym(">") => Rel::Gt,
            Tok::Sym(">=") => Rel::Ge,
            Tok::Sym("<") => Rel::Lt,
            Tok::Sym("<=") => Rel::Le,
            Tok::Sym("==") => Rel::Eq,
            _ => return Ok(lhs),
        };
        self.next();
        let rhs = self.additive(spans, stmt)?;
        Ok(KExpr::Cmp(rel, Box::new(lhs), Box::new(rhs)))
    }

    fn additive(&mut self, spans: &mut Spans, stmt: Option<usize>) -> PResult<KExpr> {
        let mut lhs = self.multiplicative(spans, stmt)?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => KBinOp::Add,
                Tok::Sym("-") => KBinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.multiplicative(spans, stmt)?;
            lhs = KExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn multiplicative(&mut self, spans: &mut Spans, stmt: Option<usize>) -> PResult<KExpr> {
        let mut lhs = self.unary(spans, stmt)?;
        loop {
            let op = match self.peek() {
                Tok::Sym("*") => KBinOp::Mul,
                Tok::Sym("/") => KBinOp::Div,
                Tok::Sym("//") => KBinOp::FloorDiv,
                Tok::Sym("%") => KBinOp::Mod,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary(spans, stmt)?;
            lhs = KExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self, spans: &mut Spans, stmt: Option<usize>) -> PResult<KExpr> {
        if self.is_sym("-") {
            self.next();
            return Ok(KExpr::Neg(Box::new(self.unary(spans, stmt)?)));
        }
        self.primary(spans, stmt)
    }

    fn args(&mut self, spans: &mut Spans, stmt: Option<usize>) -> PResult<Vec<KExpr>> {
        self.expect_sym("(")?;
        let mut out = Vec::new();
        if self.is_sym(")") {
            self.next();
            return Ok(out);
        }
        loop {
            // `axis=0` keyword arguments are accepted for reductions and ignored.
            if matches!(self.peek(), Tok::Ident(s) if s == "axis")
                && matches!(self.tokens.get(self.pos + 1).map(|t| &t.tok), Some(Tok::Sym("=")))
            {
                self.next();
                self.next();
                match self.next().tok {
                    Tok::Int(0) => {}
                    _ => return self.error("reductions run along the block axis only (axis=0)"),
                }
            } else {
                out.push(self.expr(spans, stmt)?);
            }
            if self.is_sym(",") {
                self.next();
                continue;
            }
            break;
        }
        self.expect_sym(")")?;
        Ok(out)
    }

    fn primary(&mut self, spans: &mut Spans, stmt: Option<usize>) -> PResult<KExpr> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.next();
                Ok(KExpr::Int(v))
            }
            Tok::Real(s) => {
                self.next();
                parse_decimal(&s)
                    .map(KExpr::Real)
                    .ok_or_else(|| Diagnostic::new(line, col, format!("malformed number {}", s)))
            }
            Tok::Sym("(") => {
                self.next();
                let e = self.expr(spans, stmt)?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.next();
                let is_call = self.is_sym("(");
                match name.as_str() {
                    "program_id" => {
                        if is_call {
                            let args = self.args(spans, stmt)?;
                            if !(args.is_empty() || args == [KExpr::Int(0)]) {
                                return Err(Diagnostic::new(line, col, "only a 1-D grid is supported (program_id(0))"));
                            }
                        }
                        Ok(KExpr::ProgramId)
                    }
                    "BLOCK_SIZE" => Ok(KExpr::BlockSize),
                    _ if !is_call => {
                        spans.refs.push((name.clone(), line, col, stmt));
                        Ok(KExpr::Var(name))
                    }
                    _ => {
                        let args = self.args(spans, stmt)?;
                        let arity = |n: usize| -> PResult<()> {
                            if args.len() == n {
                                Ok(())
                            } else {
                                Err(Diagnostic::new(line, col, format!("{} expects {} argument(s), got {}", name, n, args.len())))
                            }
                        };
                        let mut args_iter = args.clone().into_iter().map(Box::new);
                        let mut take = || args_iter.next().unwrap();
                        match name.as_str() {
                            "arange" => {
                                arity(2)?;
                                spans.aranges.push((line, col, args[0].clone(), args[1].clone()));
                                Ok(KExpr::Arange(take(), take()))
                            }
                            "load" => {
                                arity(1)?;
                                Ok(KExpr::Load(take()))
                            }
                            "sum" | "max" => {
                                arity(1)?;
                                let op = if name == "sum" { RedOp::Sum } else { RedOp::Max };
                                Ok(KExpr::Reduce(op, take()))
                            }
                            "where" => {
                                arity(3)?;
                                Ok(KExpr::Where(take(), take(), take()))
                            }
                            _ => match MathFn::from_name(&name) {
                                Some(f) => {
                                    arity(1)?;
                                    Ok(KExpr::Math(f, take()))
                                }
                                None => Err(Diagnostic::new(line, col, format!("unknown function {}", name))),
                            },
                        }
                    }
                }
            }
            other => self.error(format!("expected expression, found {}", Self::describe(&other))),
        }
    }
}

fn to_size(e: &KExpr) -> Option<SizeExpr> {
    Some(match e {
        KExpr::Int(v) => SizeExpr::Lit(*v),
        KExpr::Var(n) => SizeExpr::Param(n.clone()),
        KExpr::BlockSize => SizeExpr::Block,
        KExpr::Bin(op, a, b) => {
            let (a, b) = (Box::new(to_size(a)?), Box::new(to_size(b)?));
            match op {
                KBinOp::Add => SizeExpr::Add(a, b),
                KBinOp::Sub => SizeExpr::Sub(a, b),
                KBinOp::Mul => SizeExpr::Mul(a, b),
                KBinOp::Div | KBinOp::FloorDiv => SizeExpr::Div(a, b),
                KBinOp::Mod => return None,
            }
        }
        _ => return None,
    })
}

fn validate(k: &KernelModule, spans: &Spans) -> Vec<Diagnostic> {
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    for (p, &(line, col)) in k.params.iter().zip(&spans.params) {
        if !seen.insert(p.name.as_str()) {
            errors.push(Diagnostic::new(line, col, format!("duplicate parameter {}", p.name)));
        }
    }
    if k.outputs().next().is_none() {
        let (line, col) = spans.header;
        errors.push(Diagnostic::new(line, col, "kernel has no tensor-out parameter"));
    }
    let int_params: HashSet<&str> = k
        .params
        .iter()
        .filter(|p| p.kind == ParamKind::ScalarInt)
        .map(|p| p.name.as_str())
        .collect();
    let param_names: HashSet<&str> = k.params.iter().map(|p| p.name.as_str()).collect();

    let mut defined_at: Vec<(String, usize)> = Vec::new();
    for (i, s) in k.body.iter().enumerate() {
        if let Stmt::Assign(name, _) = s {
            let (line, col) = spans.stmts[i];
            if param_names.contains(name.as_str()) {
                errors.push(Diagnostic::new(line, col, format!("cannot assign to parameter {}", name)));
            } else if defined_at.iter().any(|(n, _)| n == name) {
                errors.push(Diagnostic::new(line, col, format!("local {} is assigned more than once", name)));
            } else {
                defined_at.push((name.clone(), i));
            }
        }
    }
    for (name, line, col, stmt) in &spans.refs {
        let ok = match stmt {
            None => int_params.contains(name.as_str()),
            Some(idx) => {
                param_names.contains(name.as_str())
                    || defined_at.iter().any(|(n, at)| n == name && at < idx)
            }
        };
        if !ok {
            let msg = if stmt.is_none() && param_names.contains(name.as_str()) {
                format!("{} is not an int parameter", name)
            } else {
                format!("unknown identifier {}", name)
            };
            errors.push(Diagnostic::new(*line, *col, msg));
        }
    }
    for (line, col, lo, hi) in &spans.aranges {
        let b = k.block_size as i64;
        match (lo.const_int(b), hi.const_int(b)) {
            (Some(lo), Some(hi)) => {
                if hi - lo != b {
                    errors.push(Diagnostic::new(
                        *line,
                        *col,
                        format!("arange length {} does not equal block size {}", hi - lo, b),
                    ));
                }
            }
            _ => errors.push(Diagnostic::new(*line, *col, "non-constant arange bounds")),
        }
    }
    let (line, col) = spans.header;
    if !k.grid_expr.is_affine() {
        errors.push(Diagnostic::new(line, col, "grid expression must be affine in the scalar parameters"));
    }
    if let Some(live) = &k.live {
        if !live.is_affine() {
            errors.push(Diagnostic::new(line, col, "live expression must be affine in the scalar parameters"));
        }
    }
    errors
}

#[cfg(test)]
mod tests {
    use super::*;

    const ADD: &str = "
kernel add(y: out[n], x1: in[n], x2: in[n], n: int) grid(n / 4) block(4) {
    pid = program_id
    offs = pid * BLOCK_SIZE + arange(0, BLOCK_SIZE)
    a = load(x1 + offs)
    b = load(x2 + offs)
    store(y + offs, a + b)
}
";

    #[test]
    fn parses_add_kernel() {
        let k = parse_kernel(ADD).unwrap();
        assert_eq!(k.name, "add");
        let kinds: Vec<_> = k.params.iter().map(|p| (p.name.as_str(), p.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                ("y", ParamKind::TensorOut),
                ("x1", ParamKind::TensorIn),
                ("x2", ParamKind::TensorIn),
                ("n", ParamKind::ScalarInt)
            ]
        );
        assert_eq!(k.block_size, 4);
        assert_eq!(k.body.len(), 5);
    }

    #[test]
    fn unknown_identifier_is_reported() {
        let src = ADD.replace("load(x2 + offs)", "load(z + offs)");
        let err = parse_kernel(&src).unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].message, "unknown identifier z");
        assert_eq!((err.0[0].line, err.0[0].col), (6, 14));
        assert_eq!(err.render("add.klift"), "add.klift:6:14: unknown identifier z");
    }

    #[test]
    fn missing_shape_annotation() {
        let src = ADD.replace("x1: in[n]", "x1: in");
        let err = parse_kernel(&src).unwrap_err();
        assert!(err.0[0].message.contains("missing shape annotation for tensor x1"), "{}", err);
    }

    #[test]
    fn non_constant_arange() {
        let src = ADD.replace("arange(0, BLOCK_SIZE)", "arange(pid, pid + 4)");
        let err = parse_kernel(&src).unwrap_err();
        assert!(err.0.iter().any(|d| d.message == "non-constant arange bounds"), "{}", err);
        let src = ADD.replace("arange(0, BLOCK_SIZE)", "arange(0, 3)");
        let err = parse_kernel(&src).unwrap_err();
        assert!(err.0[0].message.contains("does not equal block size"));
    }

    #[test]
    fn single_assignment_and_use_before_definition() {
        let src = ADD.replace("b = load(x2 + offs)", "a = load(x2 + offs)");
        let err = parse_kernel(&src).unwrap_err();
        assert!(err.0.iter().any(|d| d.message.contains("assigned more than once")));
        let src = ADD.replace("a = load(x1 + offs)", "a = load(x1 + offz)");
        assert!(parse_kernel(&src).is_err());
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_kernel("kernel k(y: out[4]) grid(1) block(4) {\n  a = (1 +\n}\n").unwrap_err();
        assert_eq!(err.0[0].line, 2);
    }
}
