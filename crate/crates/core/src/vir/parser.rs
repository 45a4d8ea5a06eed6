//! Parser for the textual `.vir` form.

use num_bigint::BigInt;

use super::ast::*;
use super::VirError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Str(String),
    Sym(&'static str),
    Eof,
}

const SYMBOLS: &[&str] = &[
    "{:", "==>", "::", ":=", "==", "!=", "<=", ">=", "&&", "||", "+", "-", "*", "<", ">", "!", "(", ")", "{", "}", "[",
    "]", ",", ";", ":", "=",
];

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, VirError> {
    let b = src.as_bytes();
    let mut out = vec![];
    let (mut i, mut line) = (0, 1);
    'outer: while i < b.len() {
        let c = b[i] as char;
        if c == '\n' {
            line += 1;
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if src[i..].starts_with("//") {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let s = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'$') {
                i += 1;
            }
            out.push((Tok::Ident(src[s..i].to_string()), line));
        } else if c.is_ascii_digit() {
            let s = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            out.push((Tok::Int(src[s..i].parse().unwrap()), line));
        } else if c == '"' {
            let mut s = String::new();
            i += 1;
            while i < b.len() && b[i] != b'"' {
                if b[i] == b'\\' && i + 1 < b.len() {
                    i += 1;
                }
                let ch = src[i..].chars().next().unwrap();
                s.push(ch);
                i += ch.len_utf8();
            }
            if i >= b.len() {
                return Err(VirError::Parse { line, message: "unterminated string".into() });
            }
            i += 1;
            out.push((Tok::Str(s), line));
        } else {
            for sym in SYMBOLS {
                if src[i..].starts_with(sym) {
                    out.push((Tok::Sym(sym), line));
                    i += sym.len();
                    continue 'outer;
                }
            }
            return Err(VirError::Parse { line, message: format!("unexpected character `{c}`") });
        }
    }
    out.push((Tok::Eof, line));
    Ok(out)
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

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, VirError> {
        Err(VirError::Parse { line: self.toks[self.pos].1, message: format!("{} near {:?}", msg.into(), self.peek()) })
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.next();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), VirError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<(), VirError> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.err(format!("expected `{k}`"))
        }
    }

    fn ident(&mut self) -> Result<String, VirError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn int_lit(&mut self) -> Result<BigInt, VirError> {
        let neg = self.eat_sym("-");
        match self.next() {
            Tok::Int(i) => Ok(if neg { -i } else { i }),
            _ => self.err("expected integer"),
        }
    }

    fn ty(&mut self) -> Result<IrType, VirError> {
        if self.eat_sym("[") {
            let k = self.ty()?;
            self.expect_sym("]")?;
            let v = self.ty()?;
            return Ok(IrType::map(k, v));
        }
        match self.ident()?.as_str() {
            "int" => Ok(IrType::Int),
            "bool" => Ok(IrType::Bool),
            "Ref" => Ok(IrType::Ref),
            _ => self.err("expected type"),
        }
    }

    fn typed_list(&mut self, close: &str) -> Result<Vec<(String, IrType)>, VirError> {
        let mut out = vec![];
        while !self.is_sym(close) {
            let n = self.ident()?;
            self.expect_sym(":")?;
            out.push((n, self.ty()?));
            if !self.eat_sym(",") {
                break;
            }
        }
        Ok(out)
    }

    fn program(&mut self) -> Result<IrProgram, VirError> {
        let mut p = IrProgram::default();
        loop {
            if *self.peek() == Tok::Eof {
                return Ok(p);
            } else if self.eat_kw("var") {
                let n = self.ident()?;
                self.expect_sym(":")?;
                p.globals.push((n, self.ty()?));
                self.expect_sym(";")?;
            } else if self.eat_kw("function") {
                let name = self.ident()?;
                self.expect_sym("(")?;
                let mut args = vec![];
                while !self.is_sym(")") {
                    args.push(self.ty()?);
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(")")?;
                self.expect_sym(":")?;
                let ret = self.ty()?;
                self.expect_sym(";")?;
                p.ufs.push(UfDecl { name, args, ret });
            } else if self.eat_kw("const") {
                let n = self.ident()?;
                self.expect_sym(":")?;
                self.expect_kw("int")?;
                self.expect_sym("=")?;
                p.consts.push((n, self.int_lit()?));
                self.expect_sym(";")?;
            } else if self.eat_kw("axiom") {
                p.axioms.push(self.expr()?);
                self.expect_sym(";")?;
            } else if self.eat_kw("procedure") {
                p.procedures.push(self.procedure()?);
            } else {
                return self.err("expected declaration");
            }
        }
    }

    fn procedure(&mut self) -> Result<IrProcedure, VirError> {
        let name = self.ident()?;
        self.expect_sym("(")?;
        let params = self.typed_list(")")?;
        self.expect_sym(")")?;
        let returns = if self.eat_kw("returns") {
            self.expect_sym("(")?;
            let r = self.typed_list(")")?;
            self.expect_sym(")")?;
            r
        } else {
            vec![]
        };
        self.expect_sym("{")?;
        let mut locals = vec![];
        while self.eat_kw("var") {
            let n = self.ident()?;
            self.expect_sym(":")?;
            locals.push((n, self.ty()?));
            self.expect_sym(";")?;
        }
        let body = self.block_rest()?;
        Ok(IrProcedure { name, params, returns, locals, body })
    }

    /// Statements up to and including the closing brace.
    fn block_rest(&mut self) -> Result<IrStmt, VirError> {
        let mut out = vec![];
        while !self.eat_sym("}") {
            if *self.peek() == Tok::Eof {
                return self.err("unterminated block");
            }
            out.push(self.stmt()?);
        }
        Ok(IrStmt::seq(out))
    }

    fn block(&mut self) -> Result<IrStmt, VirError> {
        self.expect_sym("{")?;
        self.block_rest()
    }

    fn stmt(&mut self) -> Result<IrStmt, VirError> {
        if self.eat_kw("havoc") {
            let x = self.ident()?;
            self.expect_sym(";")?;
            return Ok(IrStmt::Havoc(x));
        }
        if self.eat_kw("assume") {
            let e = self.expr()?;
            self.expect_sym(";")?;
            return Ok(IrStmt::Assume(e));
        }
        if self.eat_kw("assert") {
            let mut label = String::new();
            if self.eat_sym("{:") {
                self.expect_kw("msg")?;
                match self.next() {
                    Tok::Str(s) => label = s,
                    _ => return self.err("expected string"),
                }
                self.expect_sym("}")?;
            }
            let e = self.expr()?;
            self.expect_sym(";")?;
            return Ok(IrStmt::Assert(e, label));
        }
        if self.eat_kw("call") {
            let mut rets = vec![];
            let proc;
            let first = self.ident()?;
            if self.is_sym("(") {
                proc = first;
            } else {
                rets.push(first);
                while self.eat_sym(",") {
                    rets.push(self.ident()?);
                }
                self.expect_sym(":=")?;
                proc = self.ident()?;
            }
            self.expect_sym("(")?;
            let args = self.args(")")?;
            self.expect_sym(";")?;
            return Ok(IrStmt::Call { proc, args, rets });
        }
        if self.eat_kw("if") {
            return self.if_rest();
        }
        if self.eat_kw("while") {
            self.expect_sym("(")?;
            let c = self.expr()?;
            self.expect_sym(")")?;
            let b = self.block()?;
            return Ok(IrStmt::While(c, Box::new(b)));
        }
        let x = self.ident()?;
        if self.is_sym("[") {
            let mut keys = vec![];
            while self.eat_sym("[") {
                keys.push(self.expr()?);
                self.expect_sym("]")?;
            }
            self.expect_sym(":=")?;
            let value = self.expr()?;
            self.expect_sym(";")?;
            return Ok(IrStmt::Store { map: x, keys, value });
        }
        self.expect_sym(":=")?;
        let e = self.expr()?;
        self.expect_sym(";")?;
        Ok(IrStmt::Assign(x, e))
    }

    fn if_rest(&mut self) -> Result<IrStmt, VirError> {
        self.expect_sym("(")?;
        let c = self.expr()?;
        self.expect_sym(")")?;
        let t = self.block()?;
        let e = if self.eat_kw("else") {
            if self.eat_kw("if") {
                self.if_rest()?
            } else {
                self.block()?
            }
        } else {
            IrStmt::Skip
        };
        Ok(IrStmt::if_(c, t, e))
    }

    fn args(&mut self, close: &str) -> Result<Vec<IrExpr>, VirError> {
        let mut out = vec![];
        while !self.is_sym(close) {
            out.push(self.expr()?);
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym(close)?;
        Ok(out)
    }

    fn binop(&self) -> Option<IrBinOp> {
        Some(match self.peek() {
            Tok::Sym("==>") => IrBinOp::Implies,
            Tok::Sym("||") => IrBinOp::Or,
            Tok::Sym("&&") => IrBinOp::And,
            Tok::Sym("==") => IrBinOp::Eq,
            Tok::Sym("!=") => IrBinOp::Ne,
            Tok::Sym("<") => IrBinOp::Lt,
            Tok::Sym("<=") => IrBinOp::Le,
            Tok::Sym(">") => IrBinOp::Gt,
            Tok::Sym(">=") => IrBinOp::Ge,
            Tok::Sym("+") => IrBinOp::Add,
            Tok::Sym("-") => IrBinOp::Sub,
            Tok::Sym("*") => IrBinOp::Mul,
            Tok::Ident(k) if k == "div" => IrBinOp::Div,
            Tok::Ident(k) if k == "mod" => IrBinOp::Mod,
            _ => return None,
        })
    }

    fn expr(&mut self) -> Result<IrExpr, VirError> {
        self.binary(1)
    }

    fn binary(&mut self, min: u8) -> Result<IrExpr, VirError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let p = op.precedence();
            if p < min {
                break;
            }
            self.next();
            let next_min = if op == IrBinOp::Implies { p } else { p + 1 };
            let rhs = self.binary(next_min)?;
            lhs = IrExpr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<IrExpr, VirError> {
        if self.eat_sym("!") {
            return Ok(IrExpr::not(self.unary()?));
        }
        if self.is_sym("-") {
            if let Tok::Int(_) = self.peek_at(1) {
                return Ok(IrExpr::Int(self.int_lit()?));
            }
            self.next();
            return Ok(IrExpr::Unary(IrUnOp::Neg, Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.is_sym("[") {
            let mut keys = vec![];
            while self.eat_sym("[") {
                keys.push(self.expr()?);
                self.expect_sym("]")?;
            }
            return Ok(IrExpr::select(base, keys));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<IrExpr, VirError> {
        match self.next() {
            Tok::Int(i) => Ok(IrExpr::Int(i)),
            Tok::Sym("(") => {
                if self.eat_kw("forall") {
                    let vars = self.typed_list("::")?;
                    self.expect_sym("::")?;
                    let body = self.expr()?;
                    self.expect_sym(")")?;
                    return Ok(IrExpr::Forall(vars, Box::new(body)));
                }
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(n) => match n.as_str() {
                "true" => Ok(IrExpr::Bool(true)),
                "false" => Ok(IrExpr::Bool(false)),
                "null" => Ok(IrExpr::Null),
                _ if self.is_sym("(") => {
                    self.next();
                    Ok(IrExpr::UF(n, self.args(")")?))
                }
                _ => Ok(IrExpr::Var(n)),
            },
            _ => {
                self.pos -= 1;
                self.err("expected expression")
            }
        }
    }
}

pub fn parse_program(src: &str) -> Result<IrProgram, VirError> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0 };
    p.program()
}

pub fn parse_expr(src: &str) -> Result<IrExpr, VirError> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.err("trailing input");
    }
    Ok(e)
}

pub fn parse_stmts(src: &str) -> Result<IrStmt, VirError> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0 };
    let mut out = vec![];
    while *p.peek() != Tok::Eof {
        out.push(p.stmt()?);
    }
    Ok(IrStmt::seq(out))
}
