//! Translation of checked Solidity programs into the verification IR.
//!
//! Every contract instance is a reference. A state variable `x` declared in
//! contract `C` becomes the global map `x_C` from instances to values, and
//! every array or mapping lives in a heap map `M_k_v` indexed by the
//! container reference and the key. Arrays additionally have an entry in
//! `Length`. Functions become procedures `f_C` taking the receiver, the
//! parameters and the sender. Calls dispatch on the dynamic type `DType`.
//!
//! The translation also produces a harness that deploys the root contract
//! with arbitrary arguments and then calls its public functions in an
//! unbounded loop with arbitrary senders and arguments.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use thiserror::Error;
use tracing::debug;

use crate::sol::{
    desugar_modifiers, BinOp, CallTarget, Contract, Expr, ExprKind, FrontendError, Function, SolType, Span,
    Stmt, StmtKind, TypedProgram, UnOp, VarKind, Visibility,
};
use crate::vir::prelude::{self, Level, DTYPE, LENGTH, NEW};
use crate::vir::*;

pub const HARNESS: &str = "Main";
pub const STR_TO_INT: &str = "StrToInt";
pub const THIS: &str = "this";
pub const SENDER: &str = "msg_sender";
pub const CHOICE: &str = "choice";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranslateError {
    #[error("unknown contract `{0}`")]
    UnknownContract(String),
    #[error("{at}: unsupported in translation: {what}")]
    Unsupported { what: String, at: Span },
    #[error(transparent)]
    Frontend(#[from] FrontendError),
}

/// A public entry point the harness can call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryPoint {
    /// Value of `choice` that selects this function.
    pub choice: usize,
    pub function: String,
    pub procedure: String,
    /// Harness locals holding the arguments, with their source types.
    pub args: Vec<(String, SolType)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Translation {
    pub program: IrProgram,
    pub root: String,
    /// Harness locals holding the constructor arguments.
    pub ctor_args: Vec<(String, SolType)>,
    pub entries: Vec<EntryPoint>,
    /// Interned string literals; the id of a string is its index.
    pub strings: Vec<String>,
}

impl Translation {
    pub fn string_id(&self, s: &str) -> Option<usize> {
        self.strings.iter().position(|x| x == s)
    }
}

/// Label attached to the IR assertion for a source assertion.
pub fn assert_label(span: Span) -> String {
    format!("{}:{}", span.line, span.col)
}

pub fn parse_label(label: &str) -> Option<Span> {
    let (l, c) = label.split_once(':')?;
    Some(Span { line: l.parse().ok()?, col: c.parse().ok()? })
}

/// μ: the IR type of a source type.
pub fn ir_type(t: &SolType) -> IrType {
    match t {
        SolType::Int | SolType::String => IrType::Int,
        SolType::Bool => IrType::Bool,
        SolType::Address | SolType::Contract(_) | SolType::Mapping(..) | SolType::Array(_) => IrType::Ref,
    }
}

/// Name of the heap map holding the entries of containers of type `t`.
pub fn heap_map(t: &SolType) -> Option<(String, IrType)> {
    let (k, v) = t.map_parts()?;
    let (k, v) = (ir_type(&k), ir_type(v));
    Some((format!("M_{}_{}", k.tag(), v.tag()), IrType::map(IrType::Ref, IrType::map(k, v))))
}

pub fn state_map(var: &str, contract: &str) -> String {
    format!("{var}_{contract}")
}

pub fn proc_name(func: &str, contract: &str) -> String {
    format!("{func}_{contract}")
}

pub fn zero_expr(t: &IrType) -> IrExpr {
    match t {
        IrType::Int => IrExpr::int(0),
        IrType::Bool => IrExpr::Bool(false),
        _ => IrExpr::Null,
    }
}

struct Tables {
    program: IrProgram,
    strings: Vec<String>,
    /// Contracts that need a separate constructor body without base calls.
    own_ctors: Vec<String>,
}

impl Tables {
    fn intern(&mut self, s: &str) -> usize {
        if let Some(i) = self.strings.iter().position(|x| x == s) {
            return i;
        }
        self.strings.push(s.to_string());
        self.strings.len() - 1
    }

    fn heap(&mut self, t: &SolType) -> String {
        let (name, ty) = heap_map(t).expect("container type");
        self.program.add_global(&name, ty);
        name
    }

    /// Levels of a fresh container of type `t` for [`prelude::map_init`].
    fn levels(&mut self, t: &SolType) -> (Vec<Level>, IrExpr) {
        let mut levels = vec![];
        let mut cur = t.clone();
        while let Some((k, v)) = cur.map_parts() {
            let v = v.clone();
            levels.push(Level { map: self.heap(&cur), key: ir_type(&k) });
            cur = v;
        }
        (levels, zero_expr(&ir_type(&cur)))
    }
}

/// Per-procedure translation state.
struct Fx<'a> {
    tp: &'a TypedProgram,
    tables: &'a mut Tables,
    /// Contract whose code is being translated (the static type of `this`).
    contract: String,
    locals: BTreeMap<String, IrType>,
    fresh: usize,
}

type R<T> = Result<T, TranslateError>;

fn unsupported<T>(what: impl Into<String>, at: Span) -> R<T> {
    Err(TranslateError::Unsupported { what: what.into(), at })
}

impl<'a> Fx<'a> {
    fn temp(&mut self, prefix: &str, t: IrType) -> String {
        self.fresh += 1;
        let n = format!("__{prefix}{}", self.fresh);
        self.locals.insert(n.clone(), t);
        n
    }

    fn declare(&mut self, name: &str, t: IrType, at: Span) -> R<()> {
        match self.locals.get(name) {
            Some(old) if *old != t => unsupported(format!("local `{name}` declared with two types"), at),
            _ => {
                self.locals.insert(name.to_string(), t);
                Ok(())
            }
        }
    }

    fn expr(&mut self, e: &Expr, pre: &mut Vec<IrStmt>) -> R<IrExpr> {
        Ok(match &e.kind {
            ExprKind::Int(i) => IrExpr::Int(i.clone()),
            ExprKind::Bool(b) => IrExpr::Bool(*b),
            ExprKind::Str(s) => {
                let id = self.tables.intern(s);
                IrExpr::UF(STR_TO_INT.into(), vec![IrExpr::Int(BigInt::from(id))])
            }
            ExprKind::Null => IrExpr::Null,
            ExprKind::This => IrExpr::var(THIS),
            ExprKind::MsgSender => IrExpr::var(SENDER),
            ExprKind::Var(n, VarKind::State(c)) => {
                IrExpr::select(IrExpr::Var(state_map(n, c)), vec![IrExpr::var(THIS)])
            }
            ExprKind::Var(n, _) => IrExpr::Var(n.clone()),
            ExprKind::EnumMember(en, m) => match self.tp.enum_value(en, m) {
                Some(v) => IrExpr::int(v as i64),
                None => return unsupported(format!("enum member {en}.{m}"), e.span),
            },
            ExprKind::Length(a) => IrExpr::select(IrExpr::var(LENGTH), vec![self.expr(a, pre)?]),
            ExprKind::Index(a, k) => {
                let m = self.tables.heap(a.ty());
                let a = self.expr(a, pre)?;
                let k = self.expr(k, pre)?;
                IrExpr::select(IrExpr::Var(m), vec![a, k])
            }
            ExprKind::Unary(op, a) => {
                let op = match op {
                    UnOp::Not => IrUnOp::Not,
                    UnOp::Neg => IrUnOp::Neg,
                };
                IrExpr::Unary(op, Box::new(self.expr(a, pre)?))
            }
            ExprKind::Binary(op, l, r) => {
                let op = match op {
                    BinOp::Add => IrBinOp::Add,
                    BinOp::Sub => IrBinOp::Sub,
                    BinOp::Mul => IrBinOp::Mul,
                    BinOp::Div => IrBinOp::Div,
                    BinOp::Mod => IrBinOp::Mod,
                    BinOp::Lt => IrBinOp::Lt,
                    BinOp::Le => IrBinOp::Le,
                    BinOp::Gt => IrBinOp::Gt,
                    BinOp::Ge => IrBinOp::Ge,
                    BinOp::Eq => IrBinOp::Eq,
                    BinOp::Ne => IrBinOp::Ne,
                    BinOp::And => IrBinOp::And,
                    BinOp::Or => IrBinOp::Or,
                    BinOp::Implies => IrBinOp::Implies,
                };
                IrExpr::bin(op, self.expr(l, pre)?, self.expr(r, pre)?)
            }
            ExprKind::Nondet => {
                let t = self.temp("nd", IrType::Bool);
                pre.push(IrStmt::Havoc(t.clone()));
                IrExpr::Var(t)
            }
            ExprKind::Call { .. } | ExprKind::New(_) => return unsupported("unnormalized expression", e.span),
        })
    }

    /// `lhs := value`, for any assignable source expression.
    fn store(&mut self, lhs: &Expr, value: IrExpr, pre: &mut Vec<IrStmt>) -> R<IrStmt> {
        Ok(match &lhs.kind {
            ExprKind::Var(n, VarKind::State(c)) => {
                let map = state_map(n, c);
                IrStmt::Store { map, keys: vec![IrExpr::var(THIS)], value }
            }
            ExprKind::Var(n, _) => IrStmt::Assign(n.clone(), value),
            ExprKind::Index(a, k) => {
                let map = self.tables.heap(a.ty());
                let a = self.expr(a, pre)?;
                let k = self.expr(k, pre)?;
                IrStmt::Store { map, keys: vec![a, k], value }
            }
            ExprKind::Length(a) => IrStmt::Store { map: LENGTH.into(), keys: vec![self.expr(a, pre)?], value },
            _ => return unsupported("assignment target", lhs.span),
        })
    }

    fn block(&mut self, ss: &[Stmt]) -> R<IrStmt> {
        let mut out = vec![];
        for s in ss {
            out.push(self.stmt(s)?);
        }
        Ok(IrStmt::seq(out))
    }

    fn stmt(&mut self, s: &Stmt) -> R<IrStmt> {
        let mut pre = vec![];
        let main = match &s.kind {
            StmtKind::VarDecl { name, ty, init, .. } => {
                let t = ir_type(ty);
                self.declare(name, t.clone(), s.span)?;
                let v = match init {
                    Some(e) => self.expr(e, &mut pre)?,
                    None => zero_expr(&t),
                };
                IrStmt::Assign(name.clone(), v)
            }
            StmtKind::Assign { lhs, rhs } => {
                let v = self.expr(rhs, &mut pre)?;
                self.store(lhs, v, &mut pre)?
            }
            StmtKind::Push { array, value } => {
                let map = self.tables.heap(array.ty());
                let a = self.expr(array, &mut pre)?;
                let v = self.expr(value, &mut pre)?;
                let len = IrExpr::select(IrExpr::var(LENGTH), vec![a.clone()]);
                IrStmt::seq(vec![
                    IrStmt::Store { map, keys: vec![a.clone(), len.clone()], value: v },
                    IrStmt::Store { map: LENGTH.into(), keys: vec![a], value: IrExpr::bin(IrBinOp::Add, len, IrExpr::int(1)) },
                ])
            }
            StmtKind::Pop { array } => {
                let map = self.tables.heap(array.ty());
                let elem = array.ty().map_parts().map(|(_, v)| v.clone()).expect("array");
                let a = self.expr(array, &mut pre)?;
                let len = IrExpr::select(IrExpr::var(LENGTH), vec![a.clone()]);
                let mut v = vec![
                    IrStmt::Assume(IrExpr::bin(IrBinOp::Gt, len.clone(), IrExpr::int(0))),
                    IrStmt::Store { map: LENGTH.into(), keys: vec![a.clone()], value: IrExpr::bin(IrBinOp::Sub, len.clone(), IrExpr::int(1)) },
                ];
                if !elem.is_reference() {
                    v.push(IrStmt::Store { map, keys: vec![a, len], value: zero_expr(&ir_type(&elem)) });
                }
                IrStmt::seq(v)
            }
            StmtKind::Require(e) => IrStmt::Assume(self.expr(e, &mut pre)?),
            StmtKind::Assert(e) => IrStmt::Assert(self.expr(e, &mut pre)?, assert_label(s.span)),
            StmtKind::If { cond, then_branch, else_branch } => {
                let c = self.expr(cond, &mut pre)?;
                IrStmt::if_(c, self.block(then_branch)?, self.block(else_branch)?)
            }
            StmtKind::While { cond, body } => {
                let c = self.expr(cond, &mut pre)?;
                let b = self.block(body)?;
                // Re-evaluate the nondeterministic parts of the condition.
                let again = pre.clone();
                IrStmt::While(c, Box::new(IrStmt::seq(vec![b, IrStmt::seq(again)])))
            }
            StmtKind::Block(b) => self.block(b)?,
            StmtKind::Call { result, target, func, args } => self.call(s.span, result.as_ref(), target, func, args, &mut pre)?,
            StmtKind::NewContract { result, contract, args } => {
                let t = self.temp("new", IrType::Ref);
                let mut argv = vec![IrExpr::Var(t.clone())];
                for a in args {
                    argv.push(self.expr(a, &mut pre)?);
                }
                argv.push(IrExpr::var(THIS));
                let store = self.store(result, IrExpr::Var(t.clone()), &mut pre)?;
                IrStmt::seq(vec![
                    IrStmt::call(NEW, vec![], vec![&t]),
                    IrStmt::Assume(IrExpr::eq(IrExpr::select(IrExpr::var(DTYPE), vec![IrExpr::Var(t.clone())]), IrExpr::var(contract))),
                    IrStmt::call(&proc_name("Ctor", contract), argv, vec![]),
                    store,
                ])
            }
            StmtKind::NewArray { result, elem, size } => {
                let n = self.expr(size, &mut pre)?;
                let ty = SolType::Array(Box::new(elem.clone()));
                let t = self.temp("new", IrType::Ref);
                let (levels, zero) = self.tables.levels(&ty);
                let mut v = vec![
                    IrStmt::Assume(IrExpr::bin(IrBinOp::Ge, n.clone(), IrExpr::int(0))),
                    IrStmt::call(NEW, vec![], vec![&t]),
                    IrStmt::Store { map: LENGTH.into(), keys: vec![IrExpr::Var(t.clone())], value: n },
                ];
                v.extend(prelude::map_init(&IrExpr::Var(t.clone()), &levels, zero));
                v.push(self.store(result, IrExpr::Var(t), &mut pre)?);
                IrStmt::seq(v)
            }
            StmtKind::NewMapping { result, ty } => {
                let t = self.temp("new", IrType::Ref);
                let mut v = self.new_container(&t, ty);
                v.push(self.store(result, IrExpr::Var(t), &mut pre)?);
                IrStmt::seq(v)
            }
            StmtKind::Expr(_) | StmtKind::Return(_) => return unsupported("unnormalized statement", s.span),
        };
        pre.push(main);
        Ok(IrStmt::seq(pre))
    }

    /// `call v := New(); assume Length[v] == 0;` followed by the
    /// initialization of every nested level.
    fn new_container(&mut self, v: &str, ty: &SolType) -> Vec<IrStmt> {
        let (levels, zero) = self.tables.levels(ty);
        let ve = IrExpr::var(v);
        let mut out = vec![
            IrStmt::call(NEW, vec![], vec![v]),
            IrStmt::Assume(IrExpr::eq(IrExpr::select(IrExpr::var(LENGTH), vec![ve.clone()]), IrExpr::int(0))),
        ];
        out.extend(prelude::map_init(&ve, &levels, zero));
        out
    }

    fn call(
        &mut self,
        at: Span,
        result: Option<&Expr>,
        target: &CallTarget,
        func: &str,
        args: &[Expr],
        pre: &mut Vec<IrStmt>,
    ) -> R<IrStmt> {
        let (recv, static_ty, sender) = match target {
            CallTarget::Internal => (IrExpr::var(THIS), self.contract.clone(), IrExpr::var(SENDER)),
            CallTarget::External(e) => {
                let SolType::Contract(c) = e.ty() else {
                    return unsupported("call on a non-contract value", at);
                };
                let r = self.expr(e, pre)?;
                pre.push(IrStmt::Assume(IrExpr::ne(r.clone(), IrExpr::Null)));
                (r, c.clone(), IrExpr::var(THIS))
            }
        };
        let mut argv = vec![recv.clone()];
        for a in args {
            argv.push(self.expr(a, pre)?);
        }
        argv.push(sender);

        let mut out = vec![];
        let rets = match result {
            None => vec![],
            Some(Expr { kind: ExprKind::Var(n, VarKind::Local | VarKind::Param), .. }) => vec![n.clone()],
            Some(lhs) => {
                let t = self.temp("ret", ir_type(lhs.ty()));
                out.push(self.store(lhs, IrExpr::Var(t.clone()), pre)?);
                vec![t]
            }
        };
        let call = self.dispatch(at, recv, &static_ty, func, argv, rets)?;
        out.insert(0, call);
        Ok(IrStmt::seq(out))
    }

    fn dispatch(&mut self, at: Span, recv: IrExpr, static_ty: &str, func: &str, args: Vec<IrExpr>, rets: Vec<String>) -> R<IrStmt> {
        let subs = self.tp.subtypes(static_ty);
        let mut branches: Vec<(&str, String)> = vec![];
        for d in &subs {
            let Some((owner, f)) = self.tp.resolve_function(d, func) else { continue };
            if f.body.is_some() {
                branches.push((d, proc_name(func, &owner.name)));
            }
        }
        let mk = |p: &str| IrStmt::Call { proc: p.to_string(), args: args.clone(), rets: rets.clone() };
        if branches.is_empty() {
            return unsupported(format!("no implementation of `{func}` for `{static_ty}`"), at);
        }
        if subs.len() == 1 && branches.len() == 1 {
            return Ok(mk(&branches[0].1));
        }
        let dtype = IrExpr::select(IrExpr::var(DTYPE), vec![recv]);
        let mut chain = IrStmt::Assume(IrExpr::Bool(false));
        for (d, p) in branches.iter().rev() {
            chain = IrStmt::if_(IrExpr::eq(dtype.clone(), IrExpr::var(d)), mk(p), chain);
        }
        Ok(chain)
    }
}

fn params_of(f: &Function) -> Vec<(String, IrType)> {
    let mut v = vec![(THIS.to_string(), IrType::Ref)];
    v.extend(f.params.iter().map(|p| (p.name.clone(), ir_type(&p.ty))));
    v.push((SENDER.to_string(), IrType::Ref));
    v
}

fn finish(name: String, params: Vec<(String, IrType)>, returns: Vec<(String, IrType)>, fx: Fx, body: IrStmt) -> IrProcedure {
    let locals = fx
        .locals
        .into_iter()
        .filter(|(n, _)| !params.iter().chain(&returns).any(|(p, _)| p == n))
        .collect();
    IrProcedure { name, params, returns, locals, body }
}

fn translate_function(tp: &TypedProgram, tables: &mut Tables, c: &Contract, f: &Function) -> R<IrProcedure> {
    let mut fx = Fx { tp, tables, contract: c.name.clone(), locals: BTreeMap::new(), fresh: 0 };
    let body = fx.block(f.body.as_deref().unwrap_or_default())?;
    let returns = f.returns.iter().map(|r| (r.name.clone(), ir_type(&r.ty))).collect::<Vec<_>>();
    // Return variables start at zero.
    let init: Vec<IrStmt> = returns.iter().map(|(n, t)| IrStmt::Assign(n.clone(), zero_expr(t))).collect();
    let body = IrStmt::seq(vec![IrStmt::seq(init), body]);
    Ok(finish(proc_name(&f.name, &c.name), params_of(f), returns, fx, body))
}

/// Zeroing, container allocation, initializers and body of `c`'s own part
/// of construction.
fn own_construction(fx: &mut Fx, c: &Contract) -> R<IrStmt> {
    let this = IrExpr::var(THIS);
    let mut out = vec![];
    for v in &c.state_vars {
        if !v.ty.is_reference() {
            out.push(IrStmt::Store { map: state_map(&v.name, &c.name), keys: vec![this.clone()], value: zero_expr(&ir_type(&v.ty)) });
        }
    }
    for v in &c.state_vars {
        if v.ty.is_reference() {
            let t = fx.temp("new", IrType::Ref);
            out.extend(fx.new_container(&t, &v.ty));
            out.push(IrStmt::Store { map: state_map(&v.name, &c.name), keys: vec![this.clone()], value: IrExpr::Var(t) });
        }
    }
    for v in &c.state_vars {
        if let Some(e) = &v.init {
            let mut pre = vec![];
            let x = fx.expr(e, &mut pre)?;
            out.extend(pre);
            out.push(IrStmt::Store { map: state_map(&v.name, &c.name), keys: vec![this.clone()], value: x });
        }
    }
    out.push(fx.block(c.constructor.body.as_deref().unwrap_or_default())?);
    Ok(IrStmt::seq(out))
}

fn ctor_target(tp: &TypedProgram, base: &str) -> String {
    if tp.order(base).len() == 1 {
        proc_name("Ctor", base)
    } else {
        proc_name("CtorOwn", base)
    }
}

fn translate_constructor(tp: &TypedProgram, tables: &mut Tables, c: &Contract, own_only: bool) -> R<IrProcedure> {
    let mut fx = Fx { tp, tables, contract: c.name.clone(), locals: BTreeMap::new(), fresh: 0 };
    let mut out = vec![];
    if !own_only {
        for base in tp.order(&c.name)[1..].iter().rev() {
            let b = tp.contract(base).expect("linearized contract");
            let mut args = vec![IrExpr::var(THIS)];
            args.extend(b.constructor.params.iter().map(|p| zero_expr(&ir_type(&p.ty))));
            args.push(IrExpr::var(SENDER));
            let target = ctor_target(tp, base);
            if tp.order(base).len() > 1 && !fx.tables.own_ctors.contains(base) {
                fx.tables.own_ctors.push(base.clone());
            }
            out.push(IrStmt::Call { proc: target, args, rets: vec![] });
        }
    }
    out.push(own_construction(&mut fx, c)?);
    let name = proc_name(if own_only { "CtorOwn" } else { "Ctor" }, &c.name);
    Ok(finish(name, params_of(&c.constructor), vec![], fx, IrStmt::seq(out)))
}

/// Public functions callable on `root`, most-derived declarations first.
pub fn public_functions<'t>(tp: &'t TypedProgram, root: &str) -> Vec<(&'t Contract, &'t Function)> {
    let mut seen: Vec<&str> = vec![];
    let mut out = vec![];
    for c in tp.order(root) {
        let c = tp.contract(c).expect("linearized contract");
        for f in &c.functions {
            if seen.contains(&f.name.as_str()) {
                continue;
            }
            seen.push(&f.name);
            if f.visibility == Visibility::Public && f.body.is_some() {
                out.push((c, f));
            }
        }
    }
    out
}

fn arg_assumptions(tp: &TypedProgram, var: &str, p: &crate::sol::Param) -> Option<IrStmt> {
    let e = tp.enum_def(p.enum_name.as_ref()?)?;
    let x = IrExpr::var(var);
    Some(IrStmt::Assume(IrExpr::and(
        IrExpr::bin(IrBinOp::Le, IrExpr::int(0), x.clone()),
        IrExpr::bin(IrBinOp::Lt, x, IrExpr::int(e.members.len() as i64)),
    )))
}

fn harness(tp: &TypedProgram, root: &Contract) -> (IrProcedure, Vec<(String, SolType)>, Vec<EntryPoint>) {
    let mut locals: Vec<(String, IrType)> = vec![
        (THIS.into(), IrType::Ref),
        (SENDER.into(), IrType::Ref),
        (CHOICE.into(), IrType::Int),
    ];
    let this = IrExpr::var(THIS);
    let sender_ok = IrStmt::Assume(IrExpr::ne(IrExpr::var(SENDER), IrExpr::Null));
    let mut init = vec![
        IrStmt::call(NEW, vec![], vec![THIS]),
        IrStmt::Assume(IrExpr::eq(IrExpr::select(IrExpr::var(DTYPE), vec![this.clone()]), IrExpr::var(&root.name))),
    ];
    let mut ctor_args = vec![];
    let mut argv = vec![this.clone()];
    for p in &root.constructor.params {
        let n = format!("ctor_{}", p.name);
        locals.push((n.clone(), ir_type(&p.ty)));
        init.push(IrStmt::Havoc(n.clone()));
        init.extend(arg_assumptions(tp, &n, p));
        argv.push(IrExpr::var(&n));
        ctor_args.push((n, p.ty.clone()));
    }
    argv.push(IrExpr::var(SENDER));
    init.push(IrStmt::Havoc(SENDER.into()));
    init.push(sender_ok.clone());
    init.push(IrStmt::call(&proc_name("Ctor", &root.name), argv, vec![]));

    let mut entries = vec![];
    let mut chain = IrStmt::Assume(IrExpr::Bool(false));
    let fns = public_functions(tp, &root.name);
    let mut branches = vec![];
    for (i, (c, f)) in fns.iter().enumerate() {
        let mut body = vec![];
        let mut argv = vec![this.clone()];
        let mut args = vec![];
        for p in &f.params {
            let n = format!("arg_{}_{}", f.name, p.name);
            locals.push((n.clone(), ir_type(&p.ty)));
            body.push(IrStmt::Havoc(n.clone()));
            body.extend(arg_assumptions(tp, &n, p));
            argv.push(IrExpr::var(&n));
            args.push((n, p.ty.clone()));
        }
        argv.push(IrExpr::var(SENDER));
        let procedure = proc_name(&f.name, &c.name);
        body.push(IrStmt::Call { proc: procedure.clone(), args: argv, rets: vec![] });
        branches.push((i + 1, IrStmt::seq(body)));
        entries.push(EntryPoint { choice: i + 1, function: f.name.clone(), procedure, args });
    }
    for (k, b) in branches.into_iter().rev() {
        chain = IrStmt::if_(IrExpr::eq(IrExpr::var(CHOICE), IrExpr::int(k as i64)), b, chain);
    }
    let round = if entries.is_empty() {
        IrStmt::Skip
    } else {
        IrStmt::seq(vec![IrStmt::Havoc(SENDER.into()), sender_ok, IrStmt::Havoc(CHOICE.into()), chain])
    };
    init.push(IrStmt::While(IrExpr::Bool(true), Box::new(round)));
    let proc = IrProcedure { name: HARNESS.into(), params: vec![], returns: vec![], locals, body: IrStmt::seq(init) };
    (proc, ctor_args, entries)
}

/// Translates `tp` with `root` as the deployed contract. Modifiers are
/// inlined first.
pub fn translate_program(tp: &TypedProgram, root: &str) -> R<Translation> {
    let tp = &desugar_modifiers(tp)?;
    let Some(root_c) = tp.contract(root) else {
        return Err(TranslateError::UnknownContract(root.into()));
    };
    let mut tables = Tables { program: IrProgram::default(), strings: vec![String::new()], own_ctors: vec![] };
    for (n, t) in prelude::prelude_globals() {
        tables.program.add_global(&n, t);
    }
    tables.program.ufs.push(UfDecl { name: STR_TO_INT.into(), args: vec![IrType::Int], ret: IrType::Int });
    for (i, c) in tp.program.contracts.iter().enumerate() {
        tables.program.consts.push((c.name.clone(), BigInt::from(i + 1)));
        for v in &c.state_vars {
            tables.program.add_global(&state_map(&v.name, &c.name), IrType::map(IrType::Ref, ir_type(&v.ty)));
        }
    }
    let mut procs = prelude::prelude_procedures();
    for c in &tp.program.contracts {
        for f in &c.functions {
            if f.body.is_some() {
                procs.push(translate_function(tp, &mut tables, c, f)?);
            }
        }
        procs.push(translate_constructor(tp, &mut tables, c, false)?);
    }
    for base in tables.own_ctors.clone() {
        let c = tp.contract(&base).expect("contract");
        procs.push(translate_constructor(tp, &mut tables, c, true)?);
    }
    let (h, ctor_args, entries) = harness(tp, root_c);
    procs.push(h);

    let mut program = tables.program;
    program.procedures = procs;
    for i in 0..tables.strings.len() {
        let k = IrExpr::Int(BigInt::from(i));
        program.axioms.push(IrExpr::eq(IrExpr::UF(STR_TO_INT.into(), vec![k.clone()]), k));
    }
    program.normalize();
    debug!(procedures = program.procedures.len(), globals = program.globals.len(), "translated");
    Ok(Translation { program, root: root.to_string(), ctor_args, entries, strings: tables.strings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sol::{parse_contract, typecheck};
    use crate::vir::prelude::NEW_UNBOUNDED;

    fn tr(src: &str, root: &str) -> Translation {
        let tp = typecheck(&parse_contract(src).unwrap()).unwrap();
        translate_program(&tp, root).unwrap()
    }

    fn body_lines(t: &Translation, proc: &str) -> Vec<String> {
        t.program.procedure(proc).unwrap().body.items().iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn nested_index_reads_through_heap_maps() {
        let t = tr("contract C { int[][] x; int y; function f() public { y = x[0][1]; } }", "C");
        assert_eq!(body_lines(&t, "f_C"), vec!["y_C[this] := M_int_int[M_int_Ref[x_C[this]][0]][1];"]);
    }

    #[test]
    fn nested_mapping_allocation() {
        let t = tr(
            "contract C { mapping(int => mapping(int => int)) x; function f() public { x = new mapping(int => mapping(int => int))(); } }",
            "C",
        );
        let got = body_lines(&t, "f_C").join("\n");
        let expected = "call __new1 := New();
assume Length[__new1] == 0;
assume (forall i1: int :: Length[M_int_Ref[__new1][i1]] == 0);
assume (forall i1: int :: !Alloc[M_int_Ref[__new1][i1]]);
call NewUnbounded();
assume (forall i1: int :: Alloc[M_int_Ref[__new1][i1]]);
assume (forall i1: int, j1: int :: i1 == j1 || M_int_Ref[__new1][i1] != M_int_Ref[__new1][j1]);
assume (forall i1: int, i2: int :: M_int_int[M_int_Ref[__new1][i1]][i2] == 0);
x_C[this] := __new1;";
        assert_eq!(got, expected);
    }

    #[test]
    fn virtual_dispatch_chain() {
        let t = tr(
            "contract A { int x; function g() public { x = 1; } function f() public { g(); } }
             contract B is A { function g() public { x = 2; } }",
            "B",
        );
        let f = body_lines(&t, "f_A").join("\n");
        assert!(f.contains("if (DType[this] == A) {"), "{f}");
        assert!(f.contains("call g_A(this, msg_sender);"), "{f}");
        assert!(f.contains("} else if (DType[this] == B) {"), "{f}");
        assert!(f.contains("assume false;"), "{f}");
        // In B only B's own g is reachable.
        let entries: Vec<&str> = t.entries.iter().map(|e| e.procedure.as_str()).collect();
        assert_eq!(entries, vec!["g_B", "f_A"]);
    }

    #[test]
    fn constructor_runs_bases_first() {
        let t = tr(
            "contract A { int x; constructor() public { x = 1; } }
             contract B is A { int y; constructor(int v) public { y = v + x; } }",
            "B",
        );
        let b = body_lines(&t, "Ctor_B");
        assert_eq!(b[0], "call Ctor_A(this, msg_sender);");
        assert_eq!(b[1], "y_B[this] := 0;");
        assert_eq!(b[2], "y_B[this] := v + x_A[this];");
    }

    #[test]
    fn strings_interned() {
        let t = tr("contract C { string s; function f() public { s = \"hi\"; } }", "C");
        assert_eq!(t.string_id(""), Some(0));
        assert_eq!(t.string_id("hi"), Some(1));
        assert_eq!(body_lines(&t, "f_C"), vec!["s_C[this] := StrToInt(1);"]);
        assert!(t.program.axioms.contains(&parse_expr("StrToInt(1) == 1").unwrap()));
    }

    #[test]
    fn printed_translation_reparses() {
        let t = tr(
            "contract C { int[] xs; mapping(address => bool) seen; function f(int a) public { xs.push(a); seen[msg.sender] = true; if (a > 3) { xs.pop(); } } }",
            "C",
        );
        let text = print_program(&t.program);
        assert_eq!(parse_program(&text).unwrap(), t.program);
    }

    #[test]
    fn mapping_of_arrays_indexes_like_nested_arrays() {
        let t = tr("contract C { mapping(int => int[]) x; int y; function f() public { y = x[0][1]; } }", "C");
        assert_eq!(body_lines(&t, "f_C"), vec!["y_C[this] := M_int_int[M_int_Ref[x_C[this]][0]][1];"]);
    }

    #[test]
    fn sender_compared_against_state_var() {
        let t = tr("contract C { address r; bool ok; function f() public { ok = msg.sender == r; } }", "C");
        assert_eq!(body_lines(&t, "f_C"), vec!["ok_C[this] := msg_sender == r_C[this];"]);
    }

    #[test]
    fn require_becomes_assume() {
        let t = tr("contract C { int x; function f(int a) public { require(a > x); } }", "C");
        assert_eq!(body_lines(&t, "f_C"), vec!["assume a > x_C[this];"]);
    }

    #[test]
    fn inherited_function_dispatches_to_base_procedure() {
        let t = tr(
            "contract A { function F() public returns (int) { return 1; } }
             contract B is A { }
             contract C is B { function F() public returns (int) { return 3; } }
             contract User { A a; int r; constructor() public { a = new B(); } function g() public { r = a.F(); } }",
            "User",
        );
        let g = body_lines(&t, "g_User").join("\n");
        assert!(g.contains(
            "if (DType[a_User[this]] == A) {
  call __ret1 := F_A(a_User[this], this);
} else if (DType[a_User[this]] == B) {
  call __ret1 := F_A(a_User[this], this);
} else if (DType[a_User[this]] == C) {
  call __ret1 := F_C(a_User[this], this);
} else {
  assume false;
}"
        ), "{g}");
    }

    #[test]
    fn single_subtype_call_is_direct() {
        let t = tr("contract C { int x; function g() public { x = 1; } function f() public { g(); } }", "C");
        assert_eq!(body_lines(&t, "f_C"), vec!["call g_C(this, msg_sender);"]);
    }

    #[test]
    fn senders_follow_call_kind() {
        let t = tr(
            "contract H { int v; function set(int x) public { v = x; } }
             contract A { H h; int n; constructor() public { h = new H(); } function hook() public { n = n + 1; }
               function f(int x) public { hook(); h.set(x); } }
             contract B is A { function hook() public { n = n + 2; } }",
            "B",
        );
        let mut internal = 0;
        let mut external = 0;
        for p in &t.program.procedures {
            p.body.visit(&mut |s| {
                let IrStmt::Call { proc, args, .. } = s else { return };
                if proc == NEW || proc == NEW_UNBOUNDED || p.name == HARNESS {
                    return;
                }
                let sender = args.last().unwrap().to_string();
                if args[0].to_string() == THIS {
                    assert_eq!(sender, SENDER, "{}: {s}", p.name);
                    internal += 1;
                } else {
                    assert_eq!(sender, THIS, "{}: {s}", p.name);
                    external += 1;
                }
            });
        }
        assert!(internal >= 3 && external >= 2, "{internal} {external}");
    }

    #[test]
    fn hello_blockchain_procedures_and_state_maps() {
        let t = tr(crate::sol::parser::tests::HELLO, "HelloBlockchain");
        let mut names: Vec<&str> = t.program.procedures.iter().map(|p| p.name.as_str()).collect();
        names.sort();
        assert_eq!(
            names,
            vec!["Ctor_HelloBlockchain", HARNESS, NEW, NEW_UNBOUNDED, "SendRequest_HelloBlockchain", "SendResponse_HelloBlockchain"]
        );
        for v in ["State", "Requestor", "Responder", "RequestMessage", "ResponseMessage"] {
            assert!(t.program.global_type(&format!("{v}_HelloBlockchain")).is_some(), "{v}");
        }
        assert_eq!(t.program.global_type("Requestor_HelloBlockchain"), Some(&IrType::map(IrType::Ref, IrType::Ref)));
        assert_eq!(t.program.global_type("State_HelloBlockchain"), Some(&IrType::map(IrType::Ref, IrType::Int)));
    }

    #[test]
    fn harness_branches_follow_declaration_order() {
        let t = tr(
            "contract C { int x; function a() public { x = 1; } function b() public { x = 2; } function c() public { x = 3; } }",
            "C",
        );
        let names: Vec<&str> = t.entries.iter().map(|e| e.procedure.as_str()).collect();
        assert_eq!(names, vec!["a_C", "b_C", "c_C"]);
        let main = print_procedure(t.program.procedure(HARNESS).unwrap());
        assert!(main.contains("if (choice == 1) {\n      call a_C(this, msg_sender);"), "{main}");
        assert!(main.contains("} else if (choice == 3) {\n      call c_C(this, msg_sender);"), "{main}");
    }

    #[test]
    fn constructor_only_harness_idles() {
        let t = tr("contract C { int x; constructor() public { x = 1; } }", "C");
        let main = t.program.procedure(HARNESS).unwrap();
        assert!(matches!(main.body.items().last(), Some(IrStmt::While(_, b)) if **b == IrStmt::Skip));
    }

    #[test]
    fn every_select_uses_a_declared_map() {
        let t = tr(
            "contract C { mapping(address => mapping(int => bool)) m; int[][] g; string s;
               function f(int i) public { m[msg.sender][i] = true; g[0][1] = i + g.length; s = \"x\"; } }",
            "C",
        );
        let mut count = 0;
        for p in &t.program.procedures {
            p.body.visit_exprs(&mut |e| {
                e.walk(&mut |x| {
                    if let IrExpr::Select(m, _) = x {
                        if let IrExpr::Var(n) = &**m {
                            count += 1;
                            assert!(t.program.global_type(n).is_some() || p.var_type(n).is_some(), "{n}");
                        }
                    }
                });
            });
        }
        assert!(count > 10);
    }
}
