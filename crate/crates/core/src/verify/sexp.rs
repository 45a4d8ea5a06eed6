//! Minimal s-expression reader for solver output.

use std::fmt;

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
            Sexp::List(l) => Some(l),
            Sexp::Atom(_) => None,
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => write!(f, "{a}"),
            Sexp::List(items) => {
                write!(f, "(")?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed s-expression at byte {at}: {message}")]
pub struct SexpError {
    pub at: usize,
    pub message: String,
}

/// Parses every top-level expression in `text`. `;` starts a line comment;
/// `|...|` symbols keep their bars and `"..."` strings keep their quotes.
pub fn parse_all(text: &str) -> Result<Vec<Sexp>, SexpError> {
    let b = text.as_bytes();
    let mut stack: Vec<Vec<Sexp>> = vec![vec![]];
    let mut i = 0;
    let err = |at: usize, m: &str| SexpError { at, message: m.to_string() };
    while i < b.len() {
        match b[i] {
            b';' => {
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
            }
            c if c.is_ascii_whitespace() => i += 1,
            b'(' => {
                stack.push(vec![]);
                i += 1;
            }
            b')' => {
                if stack.len() < 2 {
                    return Err(err(i, "unbalanced `)`"));
                }
                let done = stack.pop().unwrap();
                stack.last_mut().unwrap().push(Sexp::List(done));
                i += 1;
            }
            q @ (b'|' | b'"') => {
                let start = i;
                i += 1;
                while i < b.len() && b[i] != q {
                    i += 1;
                }
                if i == b.len() {
                    return Err(err(start, "unterminated quoted token"));
                }
                i += 1;
                stack.last_mut().unwrap().push(Sexp::Atom(text[start..i].to_string()));
            }
            _ => {
                let start = i;
                while i < b.len() && !b[i].is_ascii_whitespace() && !matches!(b[i], b'(' | b')' | b';') {
                    i += 1;
                }
                stack.last_mut().unwrap().push(Sexp::Atom(text[start..i].to_string()));
            }
        }
    }
    if stack.len() != 1 {
        return Err(err(b.len(), "unbalanced `(`"));
    }
    Ok(stack.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_model_with_comments_and_quoted_symbols() {
        let got = parse_all("sat\n(\n ;; universe\n (define-fun |x@1| () Int\n  (- 4))\n)").unwrap();
        assert_eq!(got[0], Sexp::Atom("sat".into()));
        let model = got[1].list().unwrap();
        assert_eq!(model.len(), 1);
        assert_eq!(model[0].to_string(), "(define-fun |x@1| () Int (- 4))");
    }

    #[test]
    fn rejects_unbalanced_input() {
        assert!(parse_all("(a (b)").is_err());
        assert!(parse_all("a)").is_err());
    }
}
