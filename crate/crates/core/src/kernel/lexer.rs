use super::parser::Diagnostic;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Real(String),
    Sym(&'static str),
    Newline,
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const SYMBOLS: [&str; 21] = [
    "//", ">=", "<=", "==", "(", ")", "[", "]", "{", "}", ",", ":", ";", "=", "+", "-", "*", "/",
    "%", ">", "<",
];

pub fn lex(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                // `tl.exp` style prefixes are accepted and dropped.
                let word = word.strip_prefix("tl.").unwrap_or(&word).to_string();
                if word.contains('.') {
                    return Err(Diagnostic::new(line_no, col, format!("unexpected '.' in identifier {}", word)));
                }
                out.push(Token { tok: Tok::Ident(word), line: line_no, col });
                continue;
            }
            if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
                let start = i;
                let mut real = false;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    real |= chars[i] == '.';
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        real = true;
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let tok = if real {
                    Tok::Real(text)
                } else {
                    Tok::Int(text.parse().map_err(|_| {
                        Diagnostic::new(line_no, col, format!("integer literal {} out of range", text))
                    })?)
                };
                out.push(Token { tok, line: line_no, col });
                continue;
            }
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(s) => {
                    out.push(Token { tok: Tok::Sym(s), line: line_no, col });
                    i += s.len();
                }
                None => return Err(Diagnostic::new(line_no, col, format!("unexpected character '{}'", c))),
            }
        }
        out.push(Token { tok: Tok::Newline, line: line_no, col: chars.len() + 1 });
    }
    let last = text.lines().count().max(1);
    out.push(Token { tok: Tok::Eof, line: last, col: 1 });
    Ok(out)
}
