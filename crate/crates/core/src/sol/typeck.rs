//! Type checking and normalization.
//!
//! Besides annotating every expression with its type, the checker rewrites
//! function bodies into the core statement forms consumed by the translator
//! and the reference interpreter:
//!
//! * calls and allocations nested in expressions are hoisted into temporaries,
//!   so expressions are side-effect free (`nondet()` stays an expression);
//! * enum-typed declarations become integers, keeping the enum name for
//!   printing;
//! * block-scoped locals are renamed apart when they shadow;
//! * `return e` in tail position becomes an assignment to the return variable.
//!
//! The checker accepts its own output, so instrumented programs can be
//! re-checked after new code is spliced in.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::ast::*;
use super::linearize::linearize;
use super::FrontendError;

type R<T> = Result<T, FrontendError>;

/// A checked and normalized program together with its inheritance orders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedProgram {
    pub program: SolProgram,
    pub linearization: BTreeMap<String, Vec<String>>,
}

impl TypedProgram {
    pub fn contract(&self, name: &str) -> Option<&Contract> {
        self.program.contract(name)
    }

    pub fn order(&self, contract: &str) -> &[String] {
        &self.linearization[contract]
    }

    /// The first definition of `func` along the linearization of `contract`.
    pub fn resolve_function(&self, contract: &str, func: &str) -> Option<(&Contract, &Function)> {
        resolve_function(&self.program, &self.linearization, contract, func)
    }

    /// The contract declaring state variable `var`, as seen from `contract`.
    pub fn resolve_state_var(&self, contract: &str, var: &str) -> Option<(&Contract, &StateVar)> {
        self.order(contract).iter().find_map(|c| {
            let c = self.contract(c)?;
            c.state_var(var).map(|v| (c, v))
        })
    }

    /// All state variables visible in `contract`, base-most contracts first.
    pub fn all_state_vars(&self, contract: &str) -> Vec<(&Contract, &StateVar)> {
        let mut out = vec![];
        for c in self.order(contract).iter().rev() {
            let c = self.contract(c).expect("linearized contract exists");
            out.extend(c.state_vars.iter().map(|v| (c, v)));
        }
        out
    }

    /// Contracts whose type is a subtype of `contract`, in declaration order.
    pub fn subtypes(&self, contract: &str) -> Vec<&str> {
        self.program
            .contracts
            .iter()
            .filter(|c| self.linearization[&c.name].iter().any(|b| b == contract))
            .map(|c| c.name.as_str())
            .collect()
    }

    /// The integer value of enum member `E.m`.
    pub fn enum_value(&self, enum_name: &str, member: &str) -> Option<usize> {
        find_enum(&self.program, enum_name).and_then(|e| e.members.iter().position(|m| m == member))
    }

    pub fn enum_def(&self, enum_name: &str) -> Option<&EnumDef> {
        find_enum(&self.program, enum_name)
    }
}

fn find_enum<'a>(p: &'a SolProgram, name: &str) -> Option<&'a EnumDef> {
    p.contracts.iter().find_map(|c| c.enum_def(name))
}

fn resolve_function<'a>(
    p: &'a SolProgram,
    lin: &BTreeMap<String, Vec<String>>,
    contract: &str,
    func: &str,
) -> Option<(&'a Contract, &'a Function)> {
    lin.get(contract)?.iter().find_map(|c| {
        let c = p.contract(c)?;
        c.function(func).map(|f| (c, f))
    })
}

/// Checks and normalizes a parsed program.
pub fn typecheck(p: &SolProgram) -> R<TypedProgram> {
    let mut seen = HashSet::new();
    for c in &p.contracts {
        if !seen.insert(c.name.as_str()) {
            return Err(FrontendError::type_error(c.span, format!("duplicate contract `{}`", c.name)));
        }
    }
    let lin = linearize(p)?;

    // Pass 1: resolve declared types in signatures and state variables.
    let mut prog = p.clone();
    for c in prog.contracts.iter_mut() {
        let cname = c.name.clone();
        let mut enum_names = HashSet::new();
        for e in &c.enums {
            if !enum_names.insert(e.name.clone()) || e.members.is_empty() {
                return Err(FrontendError::type_error(c.span, format!("bad enum `{}`", e.name)));
            }
        }
        for v in c.state_vars.iter_mut() {
            let (ty, en) = resolve_type(p, &v.ty, v.span)?;
            v.ty = ty;
            v.enum_name = v.enum_name.take().or(en);
        }
        let fix_fn = |f: &mut Function| -> R<()> {
            for prm in f.params.iter_mut().chain(f.returns.iter_mut()) {
                let (ty, en) = resolve_type(p, &prm.ty, f.span)?;
                prm.ty = ty;
                prm.enum_name = prm.enum_name.take().or(en);
            }
            if f.visibility == Visibility::Public && f.params.iter().any(|x| x.ty.is_reference()) {
                return Err(FrontendError::unsupported(f.span, "array or mapping parameter of a public function"));
            }
            if f.is_constructor && !f.returns.is_empty() {
                return Err(FrontendError::type_error(f.span, "constructors cannot return values"));
            }
            let mut names = HashSet::new();
            for prm in f.params.iter().chain(f.returns.iter()) {
                if !prm.name.is_empty() && !names.insert(prm.name.clone()) {
                    return Err(FrontendError::type_error(f.span, format!("duplicate parameter `{}`", prm.name)));
                }
            }
            if f.params.iter().any(|x| x.name.is_empty()) && f.body.is_some() {
                return Err(FrontendError::type_error(f.span, "unnamed parameter"));
            }
            Ok(())
        };
        fix_fn(&mut c.constructor)?;
        let mut fnames = HashSet::new();
        for f in c.functions.iter_mut() {
            fix_fn(f)?;
            if !fnames.insert(f.name.clone()) {
                return Err(FrontendError::unsupported(f.span, "function overloading"));
            }
            if f.name == cname {
                return Err(FrontendError::type_error(f.span, "function named like its contract"));
            }
        }
    }

    // State variable names must be unique across each hierarchy; overrides
    // must keep the signature.
    for c in &prog.contracts {
        let mut vars: HashMap<&str, &str> = HashMap::new();
        for b in &lin[&c.name] {
            let bc = prog.contract(b).unwrap();
            for v in &bc.state_vars {
                if let Some(prev) = vars.insert(&v.name, &bc.name) {
                    return Err(FrontendError::type_error(
                        v.span,
                        format!("state variable `{}` declared in both `{}` and `{}`", v.name, prev, bc.name),
                    ));
                }
            }
        }
        for f in &c.functions {
            for b in &lin[&c.name][1..] {
                if let Some(g) = prog.contract(b).unwrap().function(&f.name) {
                    let sig = |f: &Function| {
                        (f.params.iter().map(|x| x.ty.clone()).collect::<Vec<_>>(), f.returns.iter().map(|x| x.ty.clone()).collect::<Vec<_>>())
                    };
                    if sig(f) != sig(g) {
                        return Err(FrontendError::type_error(
                            f.span,
                            format!("`{}` overrides a function of `{}` with a different signature", f.name, b),
                        ));
                    }
                }
            }
        }
    }

    // Pass 2: bodies.
    let sigs = prog.clone();
    for ci in 0..prog.contracts.len() {
        let cname = sigs.contracts[ci].name.clone();
        let mut ck = Checker::new(&sigs, &lin, &cname);
        let c = &sigs.contracts[ci];
        let mut vars = c.state_vars.clone();
        for v in vars.iter_mut() {
            if let Some(init) = &v.init {
                let mut pre = vec![];
                let e = ck.expr(init, &mut pre)?;
                if !pre.is_empty() {
                    return Err(FrontendError::unsupported(v.span, "call or allocation in a state variable initializer"));
                }
                ck.check_assignable(&v.ty, &e)?;
                v.init = Some(e);
            }
        }
        let mut modifiers = vec![];
        for m in &c.modifiers {
            let mut ck = Checker::new(&sigs, &lin, &cname);
            ck.in_modifier = true;
            // Locals declared before `_;` stay visible after it.
            ck.scopes.push(HashMap::new());
            let mut pre = vec![];
            for s in &m.pre {
                pre.extend(ck.stmt(s, false)?);
            }
            let mut post = vec![];
            for s in &m.post {
                post.extend(ck.stmt(s, false)?);
            }
            modifiers.push(ModifierDef { name: m.name.clone(), pre, post, span: m.span });
        }
        let ctor = Checker::new(&sigs, &lin, &cname).function(&c.constructor)?;
        let mut functions = vec![];
        for f in &c.functions {
            functions.push(Checker::new(&sigs, &lin, &cname).function(f)?);
        }
        let out = &mut prog.contracts[ci];
        out.state_vars = vars;
        out.modifiers = modifiers;
        out.constructor = ctor;
        out.functions = functions;
    }
    Ok(TypedProgram { program: prog, linearization: lin })
}

fn resolve_type(p: &SolProgram, t: &SolType, at: Span) -> R<(SolType, Option<String>)> {
    Ok(match t {
        SolType::Contract(n) => {
            if p.contract(n).is_some() {
                (t.clone(), None)
            } else if find_enum(p, n).is_some() {
                (SolType::Int, Some(n.clone()))
            } else {
                return Err(FrontendError::type_error(at, format!("unknown type `{n}`")));
            }
        }
        SolType::Mapping(k, v) => {
            let (v, _) = resolve_type(p, v, at)?;
            (SolType::Mapping(k.clone(), Box::new(v)), None)
        }
        SolType::Array(v) => {
            let (v, _) = resolve_type(p, v, at)?;
            (SolType::Array(Box::new(v)), None)
        }
        other => (other.clone(), None),
    })
}

/// Where the heap object denoted by a reference-typed expression lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Loc {
    Storage,
    Memory,
}

#[derive(Debug, Clone)]
struct LocalInfo {
    name: String,
    ty: SolType,
    kind: VarKind,
    loc: Loc,
}

struct Checker<'a> {
    prog: &'a SolProgram,
    lin: &'a BTreeMap<String, Vec<String>>,
    contract: String,
    scopes: Vec<HashMap<String, LocalInfo>>,
    used: HashSet<String>,
    ret: Option<String>,
    in_modifier: bool,
}

impl<'a> Checker<'a> {
    fn new(prog: &'a SolProgram, lin: &'a BTreeMap<String, Vec<String>>, contract: &str) -> Checker<'a> {
        Checker {
            prog,
            lin,
            contract: contract.to_string(),
            scopes: vec![],
            used: HashSet::new(),
            ret: None,
            in_modifier: false,
        }
    }

    fn function(mut self, f: &Function) -> R<Function> {
        let mut out = f.clone();
        let mut top = HashMap::new();
        for prm in &f.params {
            self.used.insert(prm.name.clone());
            let loc = if prm.loc == DataLoc::Storage { Loc::Storage } else { Loc::Memory };
            top.insert(prm.name.clone(), LocalInfo { name: prm.name.clone(), ty: prm.ty.clone(), kind: VarKind::Param, loc });
        }
        if let Some(r) = out.returns.first_mut() {
            if r.name.is_empty() {
                r.name = "__ret".into();
            }
            self.used.insert(r.name.clone());
            top.insert(r.name.clone(), LocalInfo { name: r.name.clone(), ty: r.ty.clone(), kind: VarKind::Param, loc: Loc::Memory });
            self.ret = Some(r.name.clone());
        }
        self.scopes.push(top);
        if let Some(body) = &f.body {
            if f.modifiers.iter().any(|m| m.is_empty()) {
                return Err(FrontendError::UnknownModifier { name: String::new(), line: f.span.line, col: f.span.col });
            }
            out.body = Some(self.stmt_list(body, true)?);
        } else if f.is_constructor {
            return Err(FrontendError::type_error(f.span, "constructor without body"));
        }
        Ok(out)
    }

    // ---- names ----

    fn lookup_local(&self, name: &str) -> Option<&LocalInfo> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn state_var(&self, name: &str) -> Option<(&'a Contract, &'a StateVar)> {
        let prog = self.prog;
        self.lin[&self.contract].iter().find_map(|c| {
            let c = prog.contract(c)?;
            c.state_var(name).map(|v| (c, v))
        })
    }

    fn declare(&mut self, name: &str, ty: SolType, loc: Loc) -> String {
        let mut fresh = name.to_string();
        let mut i = 1;
        while self.used.contains(&fresh) {
            fresh = format!("{name}_{i}");
            i += 1;
        }
        self.used.insert(fresh.clone());
        self.scopes
            .last_mut()
            .expect("scope")
            .insert(name.to_string(), LocalInfo { name: fresh.clone(), ty, kind: VarKind::Local, loc });
        fresh
    }

    fn temp(&mut self, ty: SolType, loc: Loc) -> (String, Stmt) {
        let mut i = 0;
        let name = loop {
            let n = format!("__t{i}");
            if !self.used.contains(&n) {
                break n;
            }
            i += 1;
        };
        let name = self.declare(&name, ty.clone(), loc);
        let decl = Stmt::synth(StmtKind::VarDecl { name: name.clone(), ty, loc: DataLoc::Default, enum_name: None, init: None });
        (name, decl)
    }

    fn is_contract(&self, name: &str) -> bool {
        self.prog.contract(name).is_some()
    }

    fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        self.lin.get(sub).map(|o| o.iter().any(|c| c == sup)).unwrap_or(false)
    }

    // ---- types ----

    fn assignable(&self, to: &SolType, from: &SolType, from_expr: Option<&Expr>) -> bool {
        match (to, from) {
            _ if to == from => true,
            (SolType::Address, SolType::Contract(_)) => true,
            (SolType::Contract(_), SolType::Address) => matches!(from_expr.map(|e| &e.kind), Some(ExprKind::Null)),
            (SolType::Contract(a), SolType::Contract(b)) => self.is_subtype(b, a),
            _ => false,
        }
    }

    fn check_assignable(&self, to: &SolType, e: &Expr) -> R<()> {
        if self.assignable(to, e.ty(), Some(e)) {
            Ok(())
        } else {
            Err(FrontendError::type_error(e.span, format!("expected {to}, found {}", e.ty())))
        }
    }

    /// The location of the object a reference-typed expression denotes.
    fn loc_of(&self, e: &Expr) -> Loc {
        match &e.kind {
            ExprKind::Var(_, VarKind::State(_)) => Loc::Storage,
            ExprKind::Var(n, _) => self.scopes.iter().rev().find_map(|s| s.values().find(|i| &i.name == n)).map(|i| i.loc).unwrap_or(Loc::Memory),
            ExprKind::Index(b, _) => self.loc_of(b),
            _ => Loc::Memory,
        }
    }

    /// Rejects assignments that would copy a heap object in Solidity.
    fn check_no_copy(&self, target: &Expr, value: &Expr, at: Span) -> R<()> {
        if !value.ty().is_reference() {
            return Ok(());
        }
        let from = self.loc_of(value);
        match &target.kind {
            ExprKind::Var(_, VarKind::Local) | ExprKind::Var(_, VarKind::Param) => {
                match (self.loc_of(target), from) {
                    (Loc::Storage, Loc::Storage) | (Loc::Memory, Loc::Memory) => Ok(()),
                    (Loc::Memory, Loc::Storage) => Err(FrontendError::DeepCopyUnsupported { line: at.line, col: at.col }),
                    (Loc::Storage, Loc::Memory) => Err(FrontendError::type_error(at, "storage pointer cannot refer to memory")),
                }
            }
            _ => {
                if self.loc_of(target) == Loc::Memory && from == Loc::Memory {
                    Ok(())
                } else {
                    Err(FrontendError::DeepCopyUnsupported { line: at.line, col: at.col })
                }
            }
        }
    }

    // ---- expressions ----

    fn typed(kind: ExprKind, span: Span, ty: SolType) -> Expr {
        Expr { kind, span, ty: Some(ty) }
    }

    /// Checks `e`, hoisting calls and allocations into `pre`.
    fn expr(&mut self, e: &Expr, pre: &mut Vec<Stmt>) -> R<Expr> {
        let at = e.span;
        Ok(match &e.kind {
            ExprKind::Int(_) => Self::typed(e.kind.clone(), at, SolType::Int),
            ExprKind::Bool(_) => Self::typed(e.kind.clone(), at, SolType::Bool),
            ExprKind::Str(_) => Self::typed(e.kind.clone(), at, SolType::String),
            ExprKind::Null => Self::typed(ExprKind::Null, at, SolType::Address),
            ExprKind::This => Self::typed(ExprKind::This, at, SolType::Contract(self.contract.clone())),
            ExprKind::MsgSender => Self::typed(ExprKind::MsgSender, at, SolType::Address),
            ExprKind::Nondet => Self::typed(ExprKind::Nondet, at, SolType::Bool),
            ExprKind::Var(name, kind) => {
                if let VarKind::State(_) = kind {
                    // Already resolved by an earlier run.
                }
                if !matches!(kind, VarKind::State(_)) {
                    if let Some(info) = self.lookup_local(name) {
                        return Ok(Self::typed(ExprKind::Var(info.name.clone(), info.kind.clone()), at, info.ty.clone()));
                    }
                    // Already-renamed locals from an earlier run resolve by their new name.
                    if matches!(kind, VarKind::Local | VarKind::Param) {
                        if let Some(info) = self.scopes.iter().rev().find_map(|s| s.values().find(|i| &i.name == name)) {
                            return Ok(Self::typed(ExprKind::Var(info.name.clone(), info.kind.clone()), at, info.ty.clone()));
                        }
                    }
                }
                match self.state_var(name) {
                    Some((c, v)) => Self::typed(ExprKind::Var(name.clone(), VarKind::State(c.name.clone())), at, v.ty.clone()),
                    None => return Err(FrontendError::type_error(at, format!("unknown name `{name}`"))),
                }
            }
            ExprKind::EnumMember(en, m) => {
                let Some(def) = find_enum(self.prog, en) else {
                    return Err(FrontendError::unsupported(at, "member access"));
                };
                if !def.members.contains(m) {
                    return Err(FrontendError::type_error(at, format!("enum `{en}` has no member `{m}`")));
                }
                Self::typed(e.kind.clone(), at, SolType::Int)
            }
            ExprKind::Length(a) => {
                let a = self.expr(a, pre)?;
                if !matches!(a.ty(), SolType::Array(_)) {
                    return Err(FrontendError::type_error(at, format!(".length needs an array, found {}", a.ty())));
                }
                Self::typed(ExprKind::Length(Box::new(a)), at, SolType::Int)
            }
            ExprKind::Index(a, k) => {
                let a = self.expr(a, pre)?;
                let k = self.expr(k, pre)?;
                let Some((kt, vt)) = a.ty().map_parts() else {
                    return Err(FrontendError::type_error(at, format!("cannot index a value of type {}", a.ty())));
                };
                let vt = vt.clone();
                if !self.assignable(&kt, k.ty(), Some(&k)) {
                    return Err(FrontendError::type_error(k.span, format!("index must be {kt}, found {}", k.ty())));
                }
                Self::typed(ExprKind::Index(Box::new(a), Box::new(k)), at, vt)
            }
            ExprKind::Unary(op, a) => {
                let a = self.expr(a, pre)?;
                let want = if *op == UnOp::Not { SolType::Bool } else { SolType::Int };
                if *a.ty() != want {
                    return Err(FrontendError::type_error(at, format!("operand must be {want}, found {}", a.ty())));
                }
                Self::typed(ExprKind::Unary(*op, Box::new(a)), at, want)
            }
            ExprKind::Binary(op, l, r) => {
                let l = self.expr(l, pre)?;
                let r = if matches!(op, BinOp::And | BinOp::Or | BinOp::Implies) {
                    let mut rpre = vec![];
                    let r = self.expr(r, &mut rpre)?;
                    if !rpre.is_empty() {
                        return Err(FrontendError::unsupported(at, "call inside a short-circuit operand"));
                    }
                    r
                } else {
                    self.expr(r, pre)?
                };
                let (lt, rt) = (l.ty().clone(), r.ty().clone());
                let ty = match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => {
                        if lt != SolType::Int || rt != SolType::Int {
                            return Err(FrontendError::type_error(at, format!("arithmetic on {lt} and {rt}")));
                        }
                        SolType::Int
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        if lt != SolType::Int || rt != SolType::Int {
                            return Err(FrontendError::type_error(at, format!("ordering on {lt} and {rt}")));
                        }
                        SolType::Bool
                    }
                    BinOp::Eq | BinOp::Ne => {
                        let ok = !lt.is_reference()
                            && (lt == rt || (lt.is_address_like() && rt.is_address_like()));
                        if !ok {
                            return Err(FrontendError::type_error(at, format!("cannot compare {lt} with {rt}")));
                        }
                        SolType::Bool
                    }
                    BinOp::And | BinOp::Or | BinOp::Implies => {
                        if lt != SolType::Bool || rt != SolType::Bool {
                            return Err(FrontendError::type_error(at, format!("logical operator on {lt} and {rt}")));
                        }
                        SolType::Bool
                    }
                };
                Self::typed(ExprKind::Binary(*op, Box::new(l), Box::new(r)), at, ty)
            }
            ExprKind::Call { receiver, name, args } => {
                if receiver.is_none() {
                    if self.is_contract(name) {
                        // Contract conversion `C(x)`.
                        if args.len() != 1 {
                            return Err(FrontendError::type_error(at, "conversion takes one argument"));
                        }
                        let mut a = self.expr(&args[0], pre)?;
                        if !a.ty().is_address_like() {
                            return Err(FrontendError::type_error(at, format!("cannot convert {} to {name}", a.ty())));
                        }
                        a.ty = Some(SolType::Contract(name.clone()));
                        return Ok(a);
                    }
                    if let Some((_, f)) = resolve_function(self.prog, self.lin, &self.contract, name) {
                        if f.body.is_none() {
                            if f.params.is_empty() && args.is_empty() && f.returns.len() == 1 && f.returns[0].ty == SolType::Bool {
                                return Ok(Self::typed(ExprKind::Nondet, at, SolType::Bool));
                            }
                            return Err(FrontendError::unsupported(at, "call to a function without a body"));
                        }
                    }
                }
                let call = self.call(receiver.as_deref(), name, args, at, pre)?;
                let Some(rt) = call.ret.clone() else {
                    return Err(FrontendError::type_error(at, format!("`{name}` returns no value")));
                };
                let (tmp, decl) = self.temp(rt.clone(), Loc::Memory);
                pre.push(decl);
                let result = Self::typed(ExprKind::Var(tmp, VarKind::Local), at, rt.clone());
                pre.push(Stmt::new(StmtKind::Call { result: Some(result.clone()), target: call.target, func: call.func, args: call.args }, at));
                result
            }
            ExprKind::New(kind) => {
                let (stmt_fn, ty) = self.new_kind(kind, at, pre)?;
                let (tmp, decl) = self.temp(ty.clone(), Loc::Memory);
                pre.push(decl);
                let result = Self::typed(ExprKind::Var(tmp, VarKind::Local), at, ty);
                pre.push(Stmt::new(stmt_fn(result.clone()), at));
                result
            }
        })
    }

    fn new_kind(&mut self, kind: &NewKind, at: Span, pre: &mut Vec<Stmt>) -> R<(Box<dyn FnOnce(Expr) -> StmtKind>, SolType)> {
        Ok(match kind {
            NewKind::Contract { name, args } => {
                let Some(c) = self.prog.contract(name) else {
                    return Err(FrontendError::type_error(at, format!("unknown contract `{name}`")));
                };
                let args = self.args(&c.constructor.params, args, at, pre)?;
                let name = name.clone();
                let ty = SolType::Contract(name.clone());
                (Box::new(move |result| StmtKind::NewContract { result, contract: name, args }), ty)
            }
            NewKind::Array { elem, size } => {
                let (elem, _) = resolve_type(self.prog, elem, at)?;
                if !elem.is_elementary() && !matches!(elem, SolType::Contract(_)) {
                    return Err(FrontendError::unsupported(at, "allocation of nested arrays"));
                }
                let size = self.expr(size, pre)?;
                if *size.ty() != SolType::Int {
                    return Err(FrontendError::type_error(at, "array size must be an integer"));
                }
                let ty = SolType::Array(Box::new(elem.clone()));
                (Box::new(move |result| StmtKind::NewArray { result, elem, size }), ty)
            }
            NewKind::Mapping(t) => {
                let (t, _) = resolve_type(self.prog, t, at)?;
                if !matches!(t, SolType::Mapping(..)) {
                    return Err(FrontendError::type_error(at, "expected a mapping type"));
                }
                let ty = t.clone();
                (Box::new(move |result| StmtKind::NewMapping { result, ty: t }), ty)
            }
        })
    }

    fn args(&mut self, params: &[Param], args: &[Expr], at: Span, pre: &mut Vec<Stmt>) -> R<Vec<Expr>> {
        if params.len() != args.len() {
            return Err(FrontendError::type_error(at, format!("expected {} arguments, found {}", params.len(), args.len())));
        }
        let mut out = vec![];
        for (p, a) in params.iter().zip(args) {
            let a = self.expr(a, pre)?;
            self.check_assignable(&p.ty, &a)?;
            if a.ty().is_reference() {
                let from = self.loc_of(&a);
                let to = if p.loc == DataLoc::Storage { Loc::Storage } else { Loc::Memory };
                match (to, from) {
                    (Loc::Memory, Loc::Storage) => return Err(FrontendError::DeepCopyUnsupported { line: a.span.line, col: a.span.col }),
                    (Loc::Storage, Loc::Memory) => return Err(FrontendError::type_error(a.span, "storage parameter needs a storage argument")),
                    _ => {}
                }
            }
            out.push(a);
        }
        Ok(out)
    }

    fn call(&mut self, receiver: Option<&Expr>, name: &str, args: &[Expr], at: Span, pre: &mut Vec<Stmt>) -> R<CheckedCall> {
        match receiver {
            None => {
                let Some((_, f)) = resolve_function(self.prog, self.lin, &self.contract, name) else {
                    return Err(FrontendError::type_error(at, format!("unknown function `{name}`")));
                };
                if f.body.is_none() {
                    return Err(FrontendError::unsupported(at, "call to a function without a body"));
                }
                let args = self.args(&f.params, args, at, pre)?;
                Ok(CheckedCall { target: CallTarget::Internal, func: name.to_string(), args, ret: f.returns.first().map(|r| r.ty.clone()) })
            }
            Some(recv) => {
                let recv = self.expr(recv, pre)?;
                let SolType::Contract(cn) = recv.ty().clone() else {
                    return Err(FrontendError::type_error(at, format!("cannot call `{name}` on {}", recv.ty())));
                };
                let Some((_, f)) = resolve_function(self.prog, self.lin, &cn, name) else {
                    return Err(FrontendError::type_error(at, format!("contract `{cn}` has no function `{name}`")));
                };
                if f.visibility != Visibility::Public || f.body.is_none() {
                    return Err(FrontendError::type_error(at, format!("`{cn}.{name}` is not externally callable")));
                }
                let args = self.args(&f.params, args, at, pre)?;
                Ok(CheckedCall { target: CallTarget::External(recv), func: name.to_string(), args, ret: f.returns.first().map(|r| r.ty.clone()) })
            }
        }
    }

    fn lvalue(&mut self, e: &Expr, pre: &mut Vec<Stmt>) -> R<Expr> {
        match &e.kind {
            ExprKind::Var(..) | ExprKind::Index(..) => self.expr(e, pre),
            ExprKind::Length(a) => {
                let l = self.expr(e, pre)?;
                let _ = a;
                Ok(l)
            }
            _ => Err(FrontendError::type_error(e.span, "expression is not assignable")),
        }
    }

    // ---- statements ----

    fn stmt_list(&mut self, ss: &[Stmt], tail: bool) -> R<Vec<Stmt>> {
        self.scopes.push(HashMap::new());
        let mut out = vec![];
        for (i, s) in ss.iter().enumerate() {
            out.extend(self.stmt(s, tail && i + 1 == ss.len())?);
        }
        self.scopes.pop();
        Ok(out)
    }

    /// Emits the statement that stores the result of a call or allocation.
    fn bind_rhs(&mut self, target: Expr, rhs: &Expr, at: Span, pre: &mut Vec<Stmt>) -> R<Option<Stmt>> {
        match &rhs.kind {
            ExprKind::Call { receiver, name, args } if !(receiver.is_none() && (self.is_contract(name) || self.is_nondet(name))) => {
                let call = self.call(receiver.as_deref(), name, args, at, pre)?;
                let Some(rt) = call.ret.clone() else {
                    return Err(FrontendError::type_error(at, format!("`{name}` returns no value")));
                };
                if !self.assignable(target.ty(), &rt, None) {
                    return Err(FrontendError::type_error(at, format!("expected {}, found {rt}", target.ty())));
                }
                if rt.is_reference() && !matches!(target.kind, ExprKind::Var(_, VarKind::Local | VarKind::Param)) {
                    return Err(FrontendError::DeepCopyUnsupported { line: at.line, col: at.col });
                }
                Ok(Some(Stmt::new(StmtKind::Call { result: Some(target), target: call.target, func: call.func, args: call.args }, at)))
            }
            ExprKind::New(kind) => {
                let (mk, ty) = self.new_kind(kind, at, pre)?;
                if !self.assignable(target.ty(), &ty, None) {
                    return Err(FrontendError::type_error(at, format!("expected {}, found {ty}", target.ty())));
                }
                Ok(Some(Stmt::new(mk(target), at)))
            }
            _ => Ok(None),
        }
    }

    fn is_nondet(&self, name: &str) -> bool {
        matches!(resolve_function(self.prog, self.lin, &self.contract, name), Some((_, f)) if f.body.is_none())
    }

    fn assign(&mut self, lhs: &Expr, rhs: &Expr, at: Span) -> R<Vec<Stmt>> {
        let mut pre = vec![];
        let target = self.lvalue(lhs, &mut pre)?;
        if let Some(s) = self.bind_rhs(target.clone(), rhs, at, &mut pre)? {
            pre.push(s);
            return Ok(pre);
        }
        let value = self.expr(rhs, &mut pre)?;
        self.check_assignable(target.ty(), &value)?;
        self.check_no_copy(&target, &value, at)?;
        pre.push(Stmt::new(StmtKind::Assign { lhs: target, rhs: value }, at));
        Ok(pre)
    }

    fn stmt(&mut self, s: &Stmt, tail: bool) -> R<Vec<Stmt>> {
        let at = s.span;
        let mut pre = vec![];
        match &s.kind {
            StmtKind::VarDecl { name, ty, loc, enum_name, init } => {
                let (ty, en) = resolve_type(self.prog, ty, at)?;
                let enum_name = enum_name.clone().or(en);
                if self.scopes.last().map(|sc| sc.contains_key(name)).unwrap_or(false) {
                    return Err(FrontendError::type_error(at, format!("`{name}` is already declared in this scope")));
                }
                // Check the initializer before the name comes into scope.
                let mut init_checked = None;
                let mut bound = None;
                if let Some(init) = init {
                    let is_bound = matches!(&init.kind, ExprKind::New(_))
                        || matches!(&init.kind, ExprKind::Call { receiver, name, .. } if !(receiver.is_none() && (self.is_contract(name) || self.is_nondet(name))));
                    if is_bound {
                        bound = Some(init.clone());
                    } else {
                        let e = self.expr(init, &mut pre)?;
                        self.check_assignable(&ty, &e)?;
                        init_checked = Some(e);
                    }
                }
                let rloc = match loc {
                    DataLoc::Storage => Loc::Storage,
                    DataLoc::Memory => Loc::Memory,
                    DataLoc::Default => match &init_checked {
                        Some(e) if ty.is_reference() => self.loc_of(e),
                        _ => Loc::Memory,
                    },
                };
                let fresh = self.declare(name, ty.clone(), rloc);
                let target = Self::typed(ExprKind::Var(fresh.clone(), VarKind::Local), at, ty.clone());
                if let Some(e) = &init_checked {
                    self.check_no_copy(&target, e, at)?;
                }
                pre.push(Stmt::new(StmtKind::VarDecl { name: fresh, ty, loc: *loc, enum_name, init: init_checked }, at));
                if let Some(init) = bound {
                    let mut more = vec![];
                    let st = self.bind_rhs(target, &init, at, &mut more)?.expect("bound initializer");
                    pre.extend(more);
                    pre.push(st);
                }
                Ok(pre)
            }
            StmtKind::Assign { lhs, rhs } => self.assign(lhs, rhs, at),
            StmtKind::Call { result, target, func, args } => {
                let recv = match target {
                    CallTarget::Internal => None,
                    CallTarget::External(e) => Some(Box::new(e.clone())),
                };
                let call = Expr::new(ExprKind::Call { receiver: recv, name: func.clone(), args: args.clone() }, at);
                match result {
                    Some(r) => self.assign(r, &call, at),
                    None => self.stmt(&Stmt::new(StmtKind::Expr(call), at), tail),
                }
            }
            StmtKind::NewContract { result, contract, args } => {
                let n = Expr::new(ExprKind::New(Box::new(NewKind::Contract { name: contract.clone(), args: args.clone() })), at);
                self.assign(result, &n, at)
            }
            StmtKind::NewArray { result, elem, size } => {
                let n = Expr::new(ExprKind::New(Box::new(NewKind::Array { elem: elem.clone(), size: size.clone() })), at);
                self.assign(result, &n, at)
            }
            StmtKind::NewMapping { result, ty } => {
                let n = Expr::new(ExprKind::New(Box::new(NewKind::Mapping(ty.clone()))), at);
                self.assign(result, &n, at)
            }
            StmtKind::Expr(e) => {
                let ExprKind::Call { receiver, name, args } = &e.kind else {
                    return Err(FrontendError::type_error(at, "expression statement has no effect"));
                };
                if receiver.is_none() && (self.is_contract(name) || self.is_nondet(name)) {
                    return Err(FrontendError::type_error(at, "expression statement has no effect"));
                }
                let call = self.call(receiver.as_deref(), name, args, at, &mut pre)?;
                pre.push(Stmt::new(StmtKind::Call { result: None, target: call.target, func: call.func, args: call.args }, at));
                Ok(pre)
            }
            StmtKind::Push { array, value } => {
                let a = self.expr(array, &mut pre)?;
                let SolType::Array(elem) = a.ty().clone() else {
                    return Err(FrontendError::type_error(at, format!("push needs an array, found {}", a.ty())));
                };
                let v = self.expr(value, &mut pre)?;
                self.check_assignable(&elem, &v)?;
                if v.ty().is_reference() {
                    return Err(FrontendError::DeepCopyUnsupported { line: at.line, col: at.col });
                }
                pre.push(Stmt::new(StmtKind::Push { array: a, value: v }, at));
                Ok(pre)
            }
            StmtKind::Pop { array } => {
                let a = self.expr(array, &mut pre)?;
                if !matches!(a.ty(), SolType::Array(_)) {
                    return Err(FrontendError::type_error(at, format!("pop needs an array, found {}", a.ty())));
                }
                pre.push(Stmt::new(StmtKind::Pop { array: a }, at));
                Ok(pre)
            }
            StmtKind::Require(e) | StmtKind::Assert(e) => {
                let c = self.expr(e, &mut pre)?;
                if *c.ty() != SolType::Bool {
                    let what = if matches!(s.kind, StmtKind::Require(_)) { "require" } else { "assert" };
                    return Err(FrontendError::type_error(at, format!("{what} needs a boolean, found {}", c.ty())));
                }
                pre.push(Stmt::new(
                    if matches!(s.kind, StmtKind::Require(_)) { StmtKind::Require(c) } else { StmtKind::Assert(c) },
                    at,
                ));
                Ok(pre)
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                let c = self.cond(cond, &mut pre)?;
                let t = self.stmt_list(then_branch, tail)?;
                let e = self.stmt_list(else_branch, tail)?;
                pre.push(Stmt::new(StmtKind::If { cond: c, then_branch: t, else_branch: e }, at));
                Ok(pre)
            }
            StmtKind::While { cond, body } => {
                let c = self.cond(cond, &mut pre)?;
                let mut b = self.stmt_list(body, false)?;
                // Re-evaluate hoisted calls at the end of every iteration.
                b.extend(pre.iter().filter(|s| !matches!(s.kind, StmtKind::VarDecl { .. })).cloned());
                pre.push(Stmt::new(StmtKind::While { cond: c, body: b }, at));
                Ok(pre)
            }
            StmtKind::Block(body) => Ok(vec![Stmt::new(StmtKind::Block(self.stmt_list(body, tail)?), at)]),
            StmtKind::Return(e) => {
                if self.in_modifier {
                    return Err(FrontendError::unsupported(at, "return in a modifier"));
                }
                if !tail {
                    return Err(FrontendError::unsupported(at, "return before the end of a function"));
                }
                match (e, self.ret.clone()) {
                    (None, _) => Ok(vec![]),
                    (Some(e), Some(r)) => {
                        let target = Expr::new(ExprKind::Var(r, VarKind::Param), at);
                        self.assign(&target, e, at)
                    }
                    (Some(_), None) => Err(FrontendError::type_error(at, "function does not return a value")),
                }
            }
        }
    }

    fn cond(&mut self, e: &Expr, pre: &mut Vec<Stmt>) -> R<Expr> {
        let c = self.expr(e, pre)?;
        if *c.ty() != SolType::Bool {
            return Err(FrontendError::type_error(e.span, format!("condition must be bool, found {}", c.ty())));
        }
        Ok(c)
    }
}

struct CheckedCall {
    target: CallTarget,
    func: String,
    args: Vec<Expr>,
    ret: Option<SolType>,
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_contract;
    use super::*;

    fn check(src: &str) -> R<TypedProgram> {
        typecheck(&parse_contract(src).unwrap())
    }

    fn body<'a>(tp: &'a TypedProgram, c: &str, f: &str) -> &'a Vec<Stmt> {
        let c = tp.contract(c).unwrap();
        if f == "constructor" {
            c.constructor.body.as_ref().unwrap()
        } else {
            c.function(f).unwrap().body.as_ref().unwrap()
        }
    }

    #[test]
    fn example_one_operand_is_integer() {
        let tp = check("contract C { mapping(int => int[]) x; function f() public { int y = x[0][1]; } }").unwrap();
        let StmtKind::VarDecl { init: Some(e), .. } = &body(&tp, "C", "f")[0].kind else { panic!() };
        assert_eq!(*e.ty(), SolType::Int);
        let ExprKind::Index(inner, _) = &e.kind else { panic!() };
        assert_eq!(*inner.ty(), SolType::Array(Box::new(SolType::Int)));
    }

    #[test]
    fn assert_needs_boolean() {
        assert!(matches!(check("contract A { function f() public { assert(1); } }"), Err(FrontendError::Type { .. })));
    }

    #[test]
    fn storage_to_storage_array_copy_rejected() {
        let r = check("contract A { int[] a; int[] b; function f() public { a = b; } }");
        assert!(matches!(r, Err(FrontendError::DeepCopyUnsupported { .. })), "{r:?}");
        // A storage pointer aliases instead of copying.
        check("contract A { int[] a; function f() public { int[] storage p = a; p.push(1); } }").unwrap();
        // Memory-to-storage assignment copies too.
        let r = check("contract A { int[] a; function f() public { int[] memory m = new int[](2); a = m; } }");
        assert!(matches!(r, Err(FrontendError::DeepCopyUnsupported { .. })), "{r:?}");
    }

    #[test]
    fn enums_lower_to_integers() {
        let tp = check(super::super::parser::tests::HELLO).unwrap();
        let c = tp.contract("HelloBlockchain").unwrap();
        assert_eq!(c.state_vars[0].ty, SolType::Int);
        assert_eq!(c.state_vars[0].enum_name.as_deref(), Some("StateType"));
        assert_eq!(tp.enum_value("StateType", "Respond"), Some(1));
    }

    #[test]
    fn nested_calls_are_hoisted() {
        let src = "contract A { function F() public returns (bool) { return true; } }
                   contract C { A a; constructor() public { a = new A(); assert(a.F()); } }";
        let tp = check(src).unwrap();
        let b = body(&tp, "C", "constructor");
        assert!(matches!(b[0].kind, StmtKind::NewContract { .. }));
        assert!(matches!(b[1].kind, StmtKind::VarDecl { init: None, .. }));
        assert!(matches!(&b[2].kind, StmtKind::Call { result: Some(_), target: CallTarget::External(_), .. }));
        assert!(matches!(b[3].kind, StmtKind::Assert(_)));
        let f = body(&tp, "A", "F");
        assert!(matches!(&f[0].kind, StmtKind::Assign { lhs, .. } if matches!(&lhs.kind, ExprKind::Var(n, _) if n == "__ret")));
    }

    #[test]
    fn early_return_rejected() {
        let r = check("contract A { function f(int x) public returns (int) { if (x > 0) { return 1; } return 2; } }");
        assert!(matches!(r, Err(FrontendError::UnsupportedFeature { .. })));
        check("contract A { function f(int x) public returns (int) { if (x > 0) { return 1; } else { return 2; } } }").unwrap();
    }

    #[test]
    fn nondet_declaration_becomes_expression() {
        let tp = check("contract A { function nondet() returns (bool); function f() public { require(nondet() || false); } }").unwrap();
        let StmtKind::Require(e) = &body(&tp, "A", "f")[0].kind else { panic!() };
        let ExprKind::Binary(_, l, _) = &e.kind else { panic!() };
        assert_eq!(l.kind, ExprKind::Nondet);
    }

    #[test]
    fn shadowed_locals_renamed() {
        let tp = check("contract A { function f() public { int x = 1; { int x = 2; x = 3; } x = 4; } }").unwrap();
        let b = body(&tp, "A", "f");
        let StmtKind::Block(inner) = &b[1].kind else { panic!() };
        assert!(matches!(&inner[0].kind, StmtKind::VarDecl { name, .. } if name == "x_1"));
        assert!(matches!(&inner[1].kind, StmtKind::Assign { lhs, .. } if matches!(&lhs.kind, ExprKind::Var(n, _) if n == "x_1")));
        assert!(matches!(&b[2].kind, StmtKind::Assign { lhs, .. } if matches!(&lhs.kind, ExprKind::Var(n, _) if n == "x")));
    }

    #[test]
    fn checker_accepts_its_own_output() {
        let src = "contract A { int[] xs; function F() public returns (bool) { return true; } }
                   contract C { A a; int k; constructor() public { a = new A(); bool b = a.F(); k = 1; { int k2 = 2; } } }";
        let tp = check(src).unwrap();
        let again = typecheck(&tp.program).unwrap();
        assert_eq!(again, tp);
    }

    #[test]
    fn subtype_and_resolution_queries() {
        let src = "contract A { function F() public returns (bool) { return false; } }
                   contract B is A { }
                   contract C is B { function F() public returns (bool) { return true; } }";
        let tp = check(src).unwrap();
        assert_eq!(tp.subtypes("A"), vec!["A", "B", "C"]);
        assert_eq!(tp.resolve_function("B", "F").unwrap().0.name, "A");
        assert_eq!(tp.resolve_function("C", "F").unwrap().0.name, "C");
    }

    #[test]
    fn duplicate_state_var_across_hierarchy_rejected() {
        assert!(check("contract A { int x; } contract B is A { int x; }").is_err());
    }
}
