//! Recursive-descent parser for the Solidity subset.
//!
//! Syntactic sugar is removed while parsing: `for` loops become `while`
//! loops, compound assignments and `++`/`--` become plain assignments, and
//! `revert()` becomes `require(false)`. Constructs outside the subset are
//! rejected with [`FrontendError::UnsupportedFeature`].

use num_bigint::BigInt;
use num_traits::Zero;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::FrontendError;

type PResult<T> = Result<T, FrontendError>;

/// Parses a source file into a list of contracts.
pub fn parse_contract(source: &str) -> PResult<SolProgram> {
    let toks = tokenize(source)?;
    let mut p = Parser { toks, pos: 0, contract: String::new() };
    p.program()
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    contract: String,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Hex(h) => format!("`{h}`"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
    }
}

const UNSUPPORTED_WORDS: &[(&str, &str)] = &[
    ("selfdestruct", "selfdestruct"),
    ("suicide", "selfdestruct"),
    ("assembly", "inline assembly"),
    ("payable", "payable"),
    ("struct", "struct"),
    ("library", "library"),
    ("interface", "interface"),
    ("import", "import"),
    ("event", "event"),
    ("emit", "event"),
    ("delete", "delete"),
    ("break", "break"),
    ("continue", "continue"),
    ("do", "do-while loop"),
    ("now", "block timestamp"),
    ("block", "block properties"),
    ("tx", "tx.origin"),
    ("fallback", "fallback function"),
    ("receive", "receive function"),
    ("using", "using-for directive"),
    ("var", "var declaration"),
    ("bytes", "bytes type"),
    ("abstract", "abstract contract"),
    ("try", "try/catch"),
];

fn int_keyword(s: &str) -> bool {
    let digits_ok = |rest: &str| rest.is_empty() || rest.chars().all(|c| c.is_ascii_digit());
    s.strip_prefix("uint").map(digits_ok).unwrap_or(false) || s.strip_prefix("int").map(digits_ok).unwrap_or(false)
}

fn is_type_keyword(s: &str) -> bool {
    int_keyword(s) || matches!(s, "bool" | "string" | "address" | "mapping")
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_word(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, s: &str) -> bool {
        if self.is_word(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn err(&self, expected: &str) -> FrontendError {
        FrontendError::parse(self.span(), expected, &describe(self.peek()))
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.err(&format!("`{s}`")))
        }
    }

    fn check_unsupported(&self) -> PResult<()> {
        if let Tok::Ident(w) = self.peek() {
            if let Some((_, name)) = UNSUPPORTED_WORDS.iter().find(|(k, _)| k == w) {
                return Err(FrontendError::unsupported(self.span(), name));
            }
        }
        Ok(())
    }

    fn ident(&mut self) -> PResult<String> {
        self.check_unsupported()?;
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.err("identifier")),
        }
    }

    fn program(&mut self) -> PResult<SolProgram> {
        let mut contracts = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof => break,
                Tok::Ident(w) if w == "pragma" => {
                    while !self.is_sym(";") && *self.peek() != Tok::Eof {
                        self.bump();
                    }
                    self.expect_sym(";")?;
                }
                Tok::Ident(w) if w == "contract" => contracts.push(self.contract()?),
                _ => {
                    self.check_unsupported()?;
                    return Err(self.err("`contract`"));
                }
            }
        }
        Ok(SolProgram { contracts })
    }

    fn contract(&mut self) -> PResult<Contract> {
        let span = self.span();
        self.bump();
        let name = self.ident()?;
        self.contract = name.clone();
        let mut bases = Vec::new();
        if self.eat_word("is") {
            loop {
                bases.push(self.ident()?);
                if self.is_sym("(") {
                    return Err(FrontendError::unsupported(self.span(), "base constructor arguments"));
                }
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym("{")?;
        let mut c = Contract {
            name: name.clone(),
            bases,
            enums: vec![],
            state_vars: vec![],
            constructor: Function {
                name: name.clone(),
                params: vec![],
                returns: vec![],
                body: Some(vec![]),
                modifiers: vec![],
                visibility: Visibility::Public,
                is_constructor: true,
                span,
            },
            functions: vec![],
            modifiers: vec![],
            span,
        };
        let mut saw_ctor = false;
        while !self.eat_sym("}") {
            let at = self.span();
            if self.eat_word("enum") {
                let ename = self.ident()?;
                self.expect_sym("{")?;
                let mut members = vec![];
                while !self.eat_sym("}") {
                    members.push(self.ident()?);
                    if !self.eat_sym(",") {
                        self.expect_sym("}")?;
                        break;
                    }
                }
                c.enums.push(EnumDef { name: ename, members });
            } else if self.eat_word("modifier") {
                c.modifiers.push(self.modifier(at)?);
            } else if self.is_word("constructor") || self.is_word("function") {
                let f = self.function()?;
                if f.is_constructor {
                    if saw_ctor {
                        return Err(FrontendError::type_error(at, "more than one constructor"));
                    }
                    saw_ctor = true;
                    c.constructor = f;
                } else {
                    c.functions.push(f);
                }
            } else {
                self.check_unsupported()?;
                let (ty, _) = self.type_name()?;
                loop {
                    if self.eat_word("public") || self.eat_word("internal") || self.eat_word("private") {
                        continue;
                    }
                    if self.is_word("constant") || self.is_word("immutable") {
                        return Err(FrontendError::unsupported(self.span(), "constant state variable"));
                    }
                    break;
                }
                let vname = self.ident()?;
                let init = if self.eat_sym("=") { Some(self.expr()?) } else { None };
                self.expect_sym(";")?;
                c.state_vars.push(StateVar { name: vname, ty, enum_name: None, init, span: at });
            }
        }
        Ok(c)
    }

    fn modifier(&mut self, span: Span) -> PResult<ModifierDef> {
        let name = self.ident()?;
        if self.eat_sym("(") {
            if !self.eat_sym(")") {
                return Err(FrontendError::unsupported(self.span(), "modifier parameters"));
            }
        }
        self.expect_sym("{")?;
        let (mut pre, mut post, mut seen) = (vec![], vec![], false);
        while !self.eat_sym("}") {
            if self.is_word("_") && matches!(self.peek_at(1), Tok::Sym(";")) {
                let at = self.span();
                self.bump();
                self.bump();
                if seen {
                    return Err(FrontendError::parse(at, "a single `_;` placeholder", "a second `_;`"));
                }
                seen = true;
                continue;
            }
            let s = self.stmt()?;
            if seen {
                post.push(s);
            } else {
                pre.push(s);
            }
        }
        if !seen {
            return Err(FrontendError::parse(span, "a `_;` placeholder in the modifier body", "none"));
        }
        Ok(ModifierDef { name, pre, post, span })
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.expect_sym("(")?;
        let mut out = vec![];
        if self.eat_sym(")") {
            return Ok(out);
        }
        loop {
            let (ty, loc) = self.type_name()?;
            let name = match self.peek() {
                Tok::Ident(_) => self.ident()?,
                _ => String::new(),
            };
            out.push(Param { name, ty, enum_name: None, loc });
            if self.eat_sym(")") {
                return Ok(out);
            }
            self.expect_sym(",")?;
        }
    }

    fn function(&mut self) -> PResult<Function> {
        let span = self.span();
        let is_ctor_kw = self.eat_word("constructor");
        let name = if is_ctor_kw {
            self.contract.clone()
        } else {
            self.bump();
            self.ident()?
        };
        let is_constructor = is_ctor_kw || name == self.contract;
        let params = self.params()?;
        let mut visibility = Visibility::Public;
        let mut modifiers = vec![];
        let mut returns = vec![];
        loop {
            self.check_unsupported()?;
            match self.peek().clone() {
                Tok::Ident(w) => match w.as_str() {
                    "public" | "external" => {
                        self.bump();
                        visibility = Visibility::Public;
                    }
                    "internal" | "private" => {
                        self.bump();
                        visibility = Visibility::Internal;
                    }
                    "view" | "pure" | "constant" | "virtual" | "override" => {
                        self.bump();
                    }
                    "returns" => {
                        self.bump();
                        returns = self.params()?;
                        if returns.len() > 1 {
                            return Err(FrontendError::unsupported(span, "multiple return values"));
                        }
                    }
                    _ => {
                        self.bump();
                        if self.eat_sym("(") && !self.eat_sym(")") {
                            return Err(FrontendError::unsupported(self.span(), "modifier arguments"));
                        }
                        modifiers.push(w);
                    }
                },
                _ => break,
            }
        }
        let body = if self.eat_sym(";") { None } else { Some(self.block()?) };
        Ok(Function { name, params, returns, body, modifiers, visibility, is_constructor, span })
    }

    /// Parses a type, followed by an optional data location keyword.
    fn type_name(&mut self) -> PResult<(SolType, DataLoc)> {
        self.check_unsupported()?;
        let at = self.span();
        let word = self.ident()?;
        let mut ty = if int_keyword(&word) {
            SolType::Int
        } else {
            match word.as_str() {
                "bool" => SolType::Bool,
                "string" => SolType::String,
                "address" => {
                    if self.is_word("payable") {
                        return Err(FrontendError::unsupported(self.span(), "payable"));
                    }
                    SolType::Address
                }
                "mapping" => {
                    self.expect_sym("(")?;
                    let (k, _) = self.type_name()?;
                    if !matches!(k, SolType::Int | SolType::String | SolType::Address) {
                        return Err(FrontendError::type_error(at, "mapping keys must be int, string or address"));
                    }
                    self.expect_sym("=>")?;
                    let (v, _) = self.type_name()?;
                    self.expect_sym(")")?;
                    SolType::Mapping(Box::new(k), Box::new(v))
                }
                "byte" => return Err(FrontendError::unsupported(at, "bytes type")),
                _ if word.starts_with("bytes") || word.starts_with("fixed") || word.starts_with("ufixed") => {
                    return Err(FrontendError::unsupported(at, "bytes type"))
                }
                _ => SolType::Contract(word),
            }
        };
        while self.is_sym("[") {
            self.bump();
            if !self.eat_sym("]") {
                return Err(FrontendError::unsupported(self.span(), "fixed-size array"));
            }
            ty = SolType::Array(Box::new(ty));
        }
        let loc = if self.eat_word("storage") {
            DataLoc::Storage
        } else if self.eat_word("memory") || self.eat_word("calldata") {
            DataLoc::Memory
        } else {
            DataLoc::Default
        };
        Ok((ty, loc))
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_sym("{")?;
        let mut out = vec![];
        while !self.eat_sym("}") {
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    /// A statement used as a branch or loop body; a braced block is flattened.
    fn body(&mut self) -> PResult<Vec<Stmt>> {
        if self.is_sym("{") {
            self.block()
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn looks_like_decl(&self) -> bool {
        match self.peek() {
            Tok::Ident(w) if is_type_keyword(w) => true,
            Tok::Ident(_) => match self.peek_at(1) {
                Tok::Ident(w) => !matches!(w.as_str(), "is"),
                Tok::Sym("[") => matches!(self.peek_at(2), Tok::Sym("]")),
                _ => false,
            },
            _ => false,
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let at = self.span();
        self.check_unsupported()?;
        if self.is_sym("{") {
            return Ok(Stmt::new(StmtKind::Block(self.block()?), at));
        }
        if self.eat_word("if") {
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let then_branch = self.body()?;
            let else_branch = if self.eat_word("else") { self.body()? } else { vec![] };
            return Ok(Stmt::new(StmtKind::If { cond, then_branch, else_branch }, at));
        }
        if self.eat_word("while") {
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let body = self.body()?;
            return Ok(Stmt::new(StmtKind::While { cond, body }, at));
        }
        if self.eat_word("for") {
            self.expect_sym("(")?;
            let init = if self.eat_sym(";") { None } else { Some(self.simple_stmt()?) };
            let cond = if self.is_sym(";") { Expr::new(ExprKind::Bool(true), self.span()) } else { self.expr()? };
            self.expect_sym(";")?;
            let step = if self.is_sym(")") { None } else { Some(self.assignment_or_call()?) };
            self.expect_sym(")")?;
            let mut body = self.body()?;
            body.extend(step);
            let lp = Stmt::new(StmtKind::While { cond, body }, at);
            return Ok(Stmt::new(StmtKind::Block(init.into_iter().chain(Some(lp)).collect()), at));
        }
        if self.is_word("require") || self.is_word("assert") {
            let is_req = self.is_word("require");
            self.bump();
            self.expect_sym("(")?;
            let e = self.expr()?;
            if is_req && self.eat_sym(",") {
                self.expr()?;
            }
            self.expect_sym(")")?;
            self.expect_sym(";")?;
            return Ok(Stmt::new(if is_req { StmtKind::Require(e) } else { StmtKind::Assert(e) }, at));
        }
        if self.eat_word("revert") {
            self.expect_sym("(")?;
            if !self.is_sym(")") {
                self.expr()?;
            }
            self.expect_sym(")")?;
            self.expect_sym(";")?;
            return Ok(Stmt::new(StmtKind::Require(Expr::new(ExprKind::Bool(false), at)), at));
        }
        if self.eat_word("return") {
            let e = if self.is_sym(";") { None } else { Some(self.expr()?) };
            self.expect_sym(";")?;
            return Ok(Stmt::new(StmtKind::Return(e), at));
        }
        let s = self.simple_stmt()?;
        Ok(s)
    }

    /// A declaration, assignment or call, terminated by `;`.
    fn simple_stmt(&mut self) -> PResult<Stmt> {
        let at = self.span();
        let s = if self.looks_like_decl() {
            let (ty, loc) = self.type_name()?;
            let name = self.ident()?;
            let init = if self.eat_sym("=") { Some(self.expr()?) } else { None };
            Stmt::new(StmtKind::VarDecl { name, ty, loc, enum_name: None, init }, at)
        } else {
            self.assignment_or_call()?
        };
        self.expect_sym(";")?;
        Ok(s)
    }

    fn assignment_or_call(&mut self) -> PResult<Stmt> {
        let at = self.span();
        let lhs = self.expr()?;
        let compound = |op: BinOp, lhs: &Expr, rhs: Expr| {
            Expr::new(ExprKind::Binary(op, Box::new(lhs.clone()), Box::new(rhs)), at)
        };
        let one = || Expr::new(ExprKind::Int(BigInt::from(1)), at);
        let kind = if self.eat_sym("=") {
            StmtKind::Assign { rhs: self.expr()?, lhs }
        } else if let Some(op) = [("+=", BinOp::Add), ("-=", BinOp::Sub), ("*=", BinOp::Mul), ("/=", BinOp::Div), ("%=", BinOp::Mod)]
            .iter()
            .find(|(s, _)| self.is_sym(s))
            .map(|(_, o)| *o)
        {
            self.bump();
            let rhs = self.expr()?;
            StmtKind::Assign { rhs: compound(op, &lhs, rhs), lhs }
        } else if self.eat_sym("++") {
            StmtKind::Assign { rhs: compound(BinOp::Add, &lhs, one()), lhs }
        } else if self.eat_sym("--") {
            StmtKind::Assign { rhs: compound(BinOp::Sub, &lhs, one()), lhs }
        } else {
            match lhs.kind {
                ExprKind::Call { receiver: Some(r), name, mut args } if name == "push" => {
                    if args.len() != 1 {
                        return Err(FrontendError::type_error(at, "push takes exactly one argument"));
                    }
                    StmtKind::Push { array: *r, value: args.remove(0) }
                }
                ExprKind::Call { receiver: Some(r), name, args } if name == "pop" && args.is_empty() => {
                    StmtKind::Pop { array: *r }
                }
                ExprKind::Call { .. } => StmtKind::Expr(lhs),
                _ => return Err(FrontendError::parse(at, "an assignment or call statement", "an expression")),
            }
        };
        Ok(Stmt::new(kind, at))
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binop_here(&self) -> Option<BinOp> {
        let Tok::Sym(s) = self.peek() else { return None };
        Some(match *s {
            "==>" => BinOp::Implies,
            "||" => BinOp::Or,
            "&&" => BinOp::And,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Mod,
            "?" => return None,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop_here() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let at = self.span();
            self.bump();
            // `==>` is right associative; everything else associates left.
            let rhs = if op == BinOp::Implies { self.binary(prec)? } else { self.binary(prec + 1)? };
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), at);
        }
        if self.is_sym("?") {
            return Err(FrontendError::unsupported(self.span(), "conditional expression"));
        }
        if self.is_sym("&") || self.is_sym("|") || self.is_sym("^") || self.is_sym("~") {
            return Err(FrontendError::unsupported(self.span(), "bitwise operator"));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let at = self.span();
        if self.eat_sym("!") {
            return Ok(Expr::new(ExprKind::Unary(UnOp::Not, Box::new(self.unary()?)), at));
        }
        if self.eat_sym("-") {
            return Ok(Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(self.unary()?)), at));
        }
        self.postfix()
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_sym("(")?;
        let mut out = vec![];
        if self.eat_sym(")") {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat_sym(")") {
                return Ok(out);
            }
            self.expect_sym(",")?;
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            let at = self.span();
            if self.eat_sym("[") {
                let k = self.expr()?;
                self.expect_sym("]")?;
                e = Expr::new(ExprKind::Index(Box::new(e), Box::new(k)), at);
            } else if self.eat_sym(".") {
                let member = match self.peek().clone() {
                    Tok::Ident(s) => {
                        self.bump();
                        s
                    }
                    _ => return Err(self.err("member name")),
                };
                if matches!(member.as_str(), "call" | "delegatecall" | "staticcall" | "callcode") {
                    return Err(FrontendError::unsupported(at, "low-level call"));
                }
                if matches!(member.as_str(), "transfer" | "send" | "balance" | "value") {
                    return Err(FrontendError::unsupported(at, "ether transfer"));
                }
                if self.is_sym("(") {
                    let args = self.args()?;
                    e = Expr::new(ExprKind::Call { receiver: Some(Box::new(e)), name: member, args }, at);
                } else if member == "length" {
                    e = Expr::new(ExprKind::Length(Box::new(e)), at);
                } else if let ExprKind::Var(base, _) = &e.kind {
                    e = Expr::new(ExprKind::EnumMember(base.clone(), member), at);
                } else {
                    return Err(FrontendError::unsupported(at, "member access"));
                }
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let at = self.span();
        self.check_unsupported()?;
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::new(ExprKind::Int(v), at))
            }
            Tok::Hex(h) => {
                self.bump();
                let digits = &h[2..];
                if !digits.is_empty() && digits.chars().all(|c| c == '0') {
                    Ok(Expr::new(ExprKind::Null, at))
                } else {
                    Err(FrontendError::unsupported(at, "non-zero address or hex literal"))
                }
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::new(ExprKind::Str(s), at))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(w) => {
                self.bump();
                match w.as_str() {
                    "true" => Ok(Expr::new(ExprKind::Bool(true), at)),
                    "false" => Ok(Expr::new(ExprKind::Bool(false), at)),
                    "this" => Ok(Expr::new(ExprKind::This, at)),
                    "msg" => {
                        self.expect_sym(".")?;
                        match self.ident()?.as_str() {
                            "sender" => Ok(Expr::new(ExprKind::MsgSender, at)),
                            "value" => Err(FrontendError::unsupported(at, "payable")),
                            other => Err(FrontendError::unsupported(at, &format!("msg.{other}"))),
                        }
                    }
                    "new" => self.new_expr(at),
                    "address" => {
                        let mut args = self.args()?;
                        if args.len() != 1 {
                            return Err(FrontendError::type_error(at, "address(...) takes one argument"));
                        }
                        let a = args.remove(0);
                        match &a.kind {
                            ExprKind::Int(v) if v.is_zero() => Ok(Expr::new(ExprKind::Null, at)),
                            ExprKind::Int(_) => Err(FrontendError::unsupported(at, "non-zero address literal")),
                            _ => Ok(a),
                        }
                    }
                    w if int_keyword(w) && self.is_sym("(") => {
                        let mut args = self.args()?;
                        if args.len() != 1 {
                            return Err(FrontendError::type_error(at, "conversion takes one argument"));
                        }
                        Ok(args.remove(0))
                    }
                    _ => {
                        if self.is_sym("(") {
                            let args = self.args()?;
                            Ok(Expr::new(ExprKind::Call { receiver: None, name: w, args }, at))
                        } else {
                            Ok(Expr::new(ExprKind::Var(w, VarKind::Unresolved), at))
                        }
                    }
                }
            }
            _ => Err(self.err("expression")),
        }
    }

    fn new_expr(&mut self, at: Span) -> PResult<Expr> {
        if self.eat_word("mapping") {
            self.pos -= 1;
            let (ty, _) = self.type_name()?;
            self.expect_sym("(")?;
            self.expect_sym(")")?;
            return Ok(Expr::new(ExprKind::New(Box::new(NewKind::Mapping(ty))), at));
        }
        let (ty, _) = self.type_name()?;
        match ty {
            SolType::Array(elem) => {
                let mut args = self.args()?;
                if args.len() != 1 {
                    return Err(FrontendError::type_error(at, "array allocation takes a size"));
                }
                Ok(Expr::new(ExprKind::New(Box::new(NewKind::Array { elem: *elem, size: args.remove(0) })), at))
            }
            SolType::Contract(name) => {
                let args = self.args()?;
                Ok(Expr::new(ExprKind::New(Box::new(NewKind::Contract { name, args })), at))
            }
            _ => Err(FrontendError::parse(at, "contract, array or mapping type after `new`", "elementary type")),
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub const HELLO: &str = r#"
pragma solidity ^0.4.20;
contract HelloBlockchain {
    enum StateType { Request, Respond }
    StateType public State;
    address public Requestor;
    address public Responder;
    string public RequestMessage;
    string public ResponseMessage;

    function HelloBlockchain(string message) public {
        Requestor = msg.sender;
        RequestMessage = message;
        State = StateType.Request;
    }
    function SendRequest(string requestMessage) public {
        RequestMessage = requestMessage;
        State = StateType.Request;
    }
    function SendResponse(string responseMessage) public {
        Responder = msg.sender;
        ResponseMessage = responseMessage;
        State = StateType.Respond;
    }
}"#;

    #[test]
    fn hello_blockchain_shape() {
        let p = parse_contract(HELLO).unwrap();
        assert_eq!(p.contracts.len(), 1);
        let c = &p.contracts[0];
        assert_eq!(c.state_vars.len(), 5);
        assert_eq!(c.state_vars[0].ty, SolType::Contract("StateType".into()));
        assert_eq!(c.enums[0].members, vec!["Request", "Respond"]);
        assert!(c.constructor.is_constructor);
        assert_eq!(c.constructor.params.len(), 1);
        assert_eq!(c.functions.len(), 2);
    }

    #[test]
    fn empty_contract_gets_implicit_constructor() {
        let p = parse_contract("contract A { }").unwrap();
        let c = &p.contracts[0];
        assert!(c.constructor.is_constructor);
        assert!(c.constructor.params.is_empty());
        assert_eq!(c.constructor.body, Some(vec![]));
    }

    #[test]
    fn unsupported_features_rejected() {
        for (src, name) in [
            ("contract A { function f() public { selfdestruct(msg.sender); } }", "selfdestruct"),
            ("contract A { function f() public payable { } }", "payable"),
            ("contract A { struct S { int x; } }", "struct"),
            ("library L { }", "library"),
            ("contract A { function f() public { assembly { } } }", "inline assembly"),
            ("contract A { function f(address a) public { a.call(); } }", "low-level call"),
        ] {
            match parse_contract(src) {
                Err(FrontendError::UnsupportedFeature { name: n, .. }) => assert_eq!(n, name, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn parse_error_reports_position() {
        match parse_contract("contract A {\n  int x\n}") {
            Err(FrontendError::Parse { line, expected, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(expected, "`;`");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sugar_is_removed() {
        let p = parse_contract(
            "contract A { int x; function f() public { for (int i = 0; i < 3; i++) { x += i; } revert(); } }",
        )
        .unwrap();
        let body = p.contracts[0].functions[0].body.as_ref().unwrap();
        let StmtKind::Block(b) = &body[0].kind else { panic!() };
        assert!(matches!(b[0].kind, StmtKind::VarDecl { .. }));
        let StmtKind::While { body: wb, .. } = &b[1].kind else { panic!() };
        assert_eq!(wb.len(), 2);
        assert!(matches!(&body[1].kind, StmtKind::Require(e) if e.kind == ExprKind::Bool(false)));
    }

    #[test]
    fn modifier_split_on_placeholder() {
        let p = parse_contract("contract A { int x; modifier m() { int y = x; _; assert(x == y); } }").unwrap();
        let m = &p.contracts[0].modifiers[0];
        assert_eq!((m.pre.len(), m.post.len()), (1, 1));
        assert!(parse_contract("contract A { modifier m() { _; _; } }").is_err());
    }

    #[test]
    fn implication_is_right_associative_and_loosest() {
        let p = parse_contract("contract A { function f(bool a, bool b, bool c) public { assert(a && b ==> c ==> a); } }")
            .unwrap();
        let body = p.contracts[0].functions[0].body.as_ref().unwrap();
        let StmtKind::Assert(e) = &body[0].kind else { panic!() };
        let ExprKind::Binary(BinOp::Implies, l, r) = &e.kind else { panic!() };
        assert!(matches!(l.kind, ExprKind::Binary(BinOp::And, ..)));
        assert!(matches!(r.kind, ExprKind::Binary(BinOp::Implies, ..)));
    }
}
