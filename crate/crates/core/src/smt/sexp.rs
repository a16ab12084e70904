/// Minimal s-expression reader for solver output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            Sexp::List(_) => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(xs) => Some(xs),
            Sexp::Atom(_) => None,
        }
    }
}

impl std::fmt::Display for Sexp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(xs) => {
                f.write_str("(")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{}", x)?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Parses every top-level s-expression in `text`.
pub fn parse_sexps(text: &str) -> Result<Vec<Sexp>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ';' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => {
                stack.push(Vec::new());
                i += 1;
            }
            ')' => {
                let done = stack.pop().unwrap();
                match stack.last_mut() {
                    Some(parent) => parent.push(Sexp::List(done)),
                    None => return Err("unbalanced ')'".into()),
                }
                i += 1;
            }
            '"' | '|' => {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i] != c {
                    i += 1;
                }
                if i == chars.len() {
                    return Err("unterminated quoted token".into());
                }
                i += 1;
                stack.last_mut().unwrap().push(Sexp::Atom(chars[start..i].iter().collect()));
            }
            c if c.is_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() && !"()\";|".contains(chars[i]) {
                    i += 1;
                }
                stack.last_mut().unwrap().push(Sexp::Atom(chars[start..i].iter().collect()));
            }
        }
    }
    if stack.len() != 1 {
        return Err("unbalanced '('".into());
    }
    Ok(stack.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_and_quoted() {
        let s = parse_sexps("sat\n((define-fun x () Real (/ 1.0 2.0)) (error \"a (b\"))").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0], Sexp::Atom("sat".into()));
        assert_eq!(s[1].to_string(), "((define-fun x () Real (/ 1.0 2.0)) (error \"a (b\"))");
        assert!(parse_sexps("(a").is_err());
    }
}
