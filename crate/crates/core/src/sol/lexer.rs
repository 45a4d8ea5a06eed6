//! Tokenizer for the Solidity subset.

use num_bigint::BigInt;

use super::ast::Span;
use super::FrontendError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(BigInt),
    /// Hexadecimal literal, kept as written (only `0x0` is meaningful here).
    Hex(String),
    Str(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

// Longest symbols first so that maximal munch works by linear scan.
const SYMBOLS: &[&str] = &[
    "==>", "=>", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "+", "-", "*", "/",
    "%", "<", ">", "!", "=", "(", ")", "{", "}", "[", "]", ",", ";", ".", "?", ":", "&", "|", "^", "~",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, FrontendError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance(&mut i, &mut line, &mut col, 2);
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                advance(&mut i, &mut line, &mut col, 1);
            }
            if i >= chars.len() {
                return Err(FrontendError::parse(span, "end of comment", "end of input"));
            }
            advance(&mut i, &mut line, &mut col, 2);
        } else if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                advance(&mut i, &mut line, &mut col, 1);
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), span });
        } else if c.is_ascii_digit() {
            let start = i;
            if c == '0' && matches!(chars.get(i + 1), Some('x') | Some('X')) {
                advance(&mut i, &mut line, &mut col, 2);
                while i < chars.len() && chars[i].is_ascii_hexdigit() {
                    advance(&mut i, &mut line, &mut col, 1);
                }
                out.push(Token { tok: Tok::Hex(chars[start..i].iter().collect()), span });
            } else {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '_') {
                    advance(&mut i, &mut line, &mut col, 1);
                }
                let digits: String = chars[start..i].iter().filter(|c| **c != '_').collect();
                let v = digits.parse::<BigInt>().expect("digits parse");
                out.push(Token { tok: Tok::Int(v), span });
            }
        } else if c == '"' || c == '\'' {
            let quote = c;
            advance(&mut i, &mut line, &mut col, 1);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(FrontendError::parse(span, "closing quote", "end of line")),
                    Some(&ch) if ch == quote => {
                        advance(&mut i, &mut line, &mut col, 1);
                        break;
                    }
                    Some('\\') => {
                        let esc = chars.get(i + 1).copied().unwrap_or('\\');
                        s.push(match esc {
                            'n' => '\n',
                            't' => '\t',
                            other => other,
                        });
                        advance(&mut i, &mut line, &mut col, 2);
                    }
                    Some(&ch) => {
                        s.push(ch);
                        advance(&mut i, &mut line, &mut col, 1);
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), span });
        } else {
            let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(sym) => {
                    advance(&mut i, &mut line, &mut col, sym.len());
                    out.push(Token { tok: Tok::Sym(sym), span });
                }
                None => return Err(FrontendError::parse(span, "a token", &format!("`{c}`"))),
            }
        }
    }
    out.push(Token { tok: Tok::Eof, span: Span { line, col } });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn symbols_use_maximal_munch() {
        assert_eq!(
            toks("a ==> b => c == d"),
            vec![
                Tok::Ident("a".into()),
                Tok::Sym("==>"),
                Tok::Ident("b".into()),
                Tok::Sym("=>"),
                Tok::Ident("c".into()),
                Tok::Sym("=="),
                Tok::Ident("d".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_and_positions() {
        let t = tokenize("// hi\n/* x\n y */ foo 0x0 \"s\"").unwrap();
        assert_eq!(t[0].tok, Tok::Ident("foo".into()));
        assert_eq!((t[0].span.line, t[0].span.col), (3, 7));
        assert_eq!(t[1].tok, Tok::Hex("0x0".into()));
        assert_eq!(t[2].tok, Tok::Str("s".into()));
    }

    #[test]
    fn unterminated_string_fails() {
        assert!(tokenize("\"abc").is_err());
    }
}
