//! Policy instrumentation.
//!
//! Conformance to a workflow becomes ordinary assertions inside the
//! contract, expressed as checker modifiers:
//!
//! ```text
//! modifier constructor_checker() { _; assert(P(ac0) ==> State == E.s0); }
//! modifier g_checker() {
//!     E oldState = State; address oldR = R; ...
//!     _;
//!     assert((P(ac)[old] && oldState == E.s) ==> (State == E.t1 || ...));   // one per transition
//! }
//! ```
//!
//! `P(ac)` encodes access control: a global role becomes a call of the
//! definition-free `nondet()`, an instance role `q` becomes
//! `msg.sender == q`. Role membership of global roles lives off-chain, so it
//! is left unconstrained.
//!
//! Instrumented assertions carry synthetic positions (line 0, column = index
//! into [`Instrumented::origins`]) so failures map back to the policy.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::policy::{AccessSet, Policy, Workflow};
use crate::sol::ast::*;
use crate::sol::conformance::STATE_VAR;
use crate::sol::{check_syntactic_conformance, typecheck, ConformanceDiagnostic, FrontendError, TypedProgram};

/// Name of the definition-free boolean function modeling global roles.
pub const NONDET: &str = "nondet";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstrumentError {
    #[error("unknown access entry `{0}`")]
    UnknownAccessEntry(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("contract does not syntactically conform to the policy: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    NotSyntacticallyConformant(Vec<ConformanceDiagnostic>),
    #[error("instrumented program failed to check: {0}")]
    Frontend(#[from] FrontendError),
}

/// What an instrumented assertion checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssertOrigin {
    InitialState { workflow: String, state: String },
    Transition { workflow: String, function: String, from: String, to: Vec<String> },
}

impl std::fmt::Display for AssertOrigin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AssertOrigin::InitialState { workflow, state } => {
                write!(f, "violates initial state {state} of workflow {workflow}")
            }
            AssertOrigin::Transition { workflow, function, from, to } => write!(
                f,
                "violates transition {from} --{function}--> {{{}}} of workflow {workflow}",
                to.join(", ")
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instrumented {
    pub program: TypedProgram,
    /// Indexed by the column of the synthetic assertion position.
    pub origins: Vec<AssertOrigin>,
    /// Policy functions that appear in no transition; left unmodified.
    pub unconstrained: Vec<String>,
}

impl Instrumented {
    pub fn origin(&self, at: Span) -> Option<&AssertOrigin> {
        if at.line != 0 || at.col == 0 {
            return None;
        }
        self.origins.get(at.col as usize - 1)
    }
}

fn var(name: &str) -> Expr {
    Expr::new(ExprKind::Var(name.to_string(), VarKind::Unresolved), Span::default())
}

fn eq(l: Expr, r: Expr) -> Expr {
    Expr::new(ExprKind::Binary(BinOp::Eq, Box::new(l), Box::new(r)), Span::default())
}

fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
    Expr::new(ExprKind::Binary(op, Box::new(l), Box::new(r)), Span::default())
}

fn disjunction(items: Vec<Expr>) -> Expr {
    items
        .into_iter()
        .reduce(|a, b| bin(BinOp::Or, a, b))
        .unwrap_or_else(|| Expr::new(ExprKind::Bool(false), Span::default()))
}

/// `P(ac)`: global roles (as `nondet()`) then instance roles
/// (as `msg.sender == q`), each group sorted by name.
pub fn access_predicate(ac: &AccessSet, w: &Workflow) -> Result<Expr, InstrumentError> {
    access_predicate_with(ac, w, &|q| var(q))
}

fn access_predicate_with(ac: &AccessSet, w: &Workflow, role_var: &dyn Fn(&str) -> Expr) -> Result<Expr, InstrumentError> {
    let roles: BTreeSet<&str> = w.instance_roles().into_iter().map(|(p, _)| p).collect();
    let mut items = vec![];
    for _ in &ac.global_roles {
        items.push(Expr::new(ExprKind::Nondet, Span::default()));
    }
    for q in &ac.instance_roles {
        if !roles.contains(q.as_str()) {
            return Err(InstrumentError::UnknownAccessEntry(q.clone()));
        }
        items.push(eq(Expr::new(ExprKind::MsgSender, Span::default()), role_var(q)));
    }
    Ok(disjunction(items))
}

/// `α(S)`: `State == E.s` for each `s`, sorted by name.
pub fn state_predicate(states: &[String], w: &Workflow, enum_name: &str) -> Result<Expr, InstrumentError> {
    state_predicate_over(states, w, enum_name, STATE_VAR)
}

fn state_predicate_over(states: &[String], w: &Workflow, enum_name: &str, state_var: &str) -> Result<Expr, InstrumentError> {
    let sorted: BTreeSet<&String> = states.iter().collect();
    let mut items = vec![];
    for s in sorted {
        if !w.states.contains(s) {
            return Err(InstrumentError::UnknownState(s.clone()));
        }
        let member = Expr::new(ExprKind::EnumMember(enum_name.to_string(), s.clone()), Span::default());
        items.push(eq(var(state_var), member));
    }
    Ok(disjunction(items))
}

fn old_name(v: &str) -> String {
    format!("old{v}")
}

pub fn instrument_for_conformance(p: &TypedProgram, pol: &Policy) -> Result<Instrumented, InstrumentError> {
    let diags = check_syntactic_conformance(p, pol);
    if !diags.is_empty() {
        return Err(InstrumentError::NotSyntacticallyConformant(diags));
    }
    let mut prog = p.program.clone();
    let mut origins = vec![];
    let mut unconstrained = vec![];
    let next_span = |origins: &mut Vec<AssertOrigin>, o: AssertOrigin| {
        origins.push(o);
        Span { line: 0, col: origins.len() as u32 }
    };

    for w in &pol.workflows {
        let (_, state_var) = p.resolve_state_var(&w.name, STATE_VAR).expect("checked by conformance");
        let enum_name = state_var.enum_name.clone().expect("checked by conformance");
        let ci = prog.contracts.iter().position(|c| c.name == w.name).expect("checked by conformance");

        let mut modifiers = vec![];
        // Constructor: P(ac0) ==> α({s0}).
        let ac0 = AccessSet { global_roles: w.initiators.iter().cloned().collect(), instance_roles: BTreeSet::new() };
        let cond = bin(
            BinOp::Implies,
            access_predicate(&ac0, w)?,
            state_predicate(std::slice::from_ref(&w.initial_state), w, &enum_name)?,
        );
        let at = next_span(&mut origins, AssertOrigin::InitialState { workflow: w.name.clone(), state: w.initial_state.clone() });
        modifiers.push(ModifierDef {
            name: "constructor_checker".into(),
            pre: vec![],
            post: vec![Stmt::new(StmtKind::Assert(cond), at)],
            span: Span::default(),
        });
        prog.contracts[ci].constructor.modifiers.insert(0, "constructor_checker".into());

        let roles: Vec<(String, SolType)> = w
            .instance_roles()
            .into_iter()
            .map(|(q, _)| (q.to_string(), p.resolve_state_var(&w.name, q).expect("checked").1.ty.clone()))
            .collect();
        for sig in &w.functions {
            let ts = crate::policy::transitions_for_function(w, &sig.name).expect("function of the workflow");
            if ts.is_empty() {
                unconstrained.push(sig.name.clone());
                continue;
            }
            let mut pre = vec![Stmt::synth(StmtKind::VarDecl {
                name: old_name(STATE_VAR),
                ty: SolType::Int,
                loc: DataLoc::Default,
                enum_name: Some(enum_name.clone()),
                init: Some(var(STATE_VAR)),
            })];
            for (q, ty) in &roles {
                pre.push(Stmt::synth(StmtKind::VarDecl {
                    name: old_name(q),
                    ty: ty.clone(),
                    loc: DataLoc::Default,
                    enum_name: None,
                    init: Some(var(q)),
                }));
            }
            let mut post = vec![];
            for t in ts {
                let access = access_predicate_with(&t.access, w, &|q| var(&old_name(q)))?;
                let from = state_predicate_over(std::slice::from_ref(&t.start), w, &enum_name, &old_name(STATE_VAR))?;
                let to = state_predicate(&t.successors, w, &enum_name)?;
                let cond = bin(BinOp::Implies, bin(BinOp::And, access, from), to);
                let mut succ: Vec<String> = t.successors.clone();
                succ.sort();
                let at = next_span(
                    &mut origins,
                    AssertOrigin::Transition {
                        workflow: w.name.clone(),
                        function: sig.name.clone(),
                        from: t.start.clone(),
                        to: succ,
                    },
                );
                post.push(Stmt::new(StmtKind::Assert(cond), at));
            }
            let mname = format!("{}_checker", sig.name);
            modifiers.push(ModifierDef { name: mname.clone(), pre, post, span: Span::default() });

            // Inherited functions get an override in the workflow contract.
            let c = &mut prog.contracts[ci];
            if c.function(&sig.name).is_none() {
                let (_, f) = p.resolve_function(&w.name, &sig.name).expect("checked by conformance");
                c.functions.push(f.clone());
            }
            let f = c.functions.iter_mut().find(|f| f.name == sig.name).unwrap();
            f.modifiers.insert(0, mname);
        }

        let c = &mut prog.contracts[ci];
        c.modifiers.extend(modifiers);
        if p.resolve_function(&w.name, NONDET).is_none() {
            c.functions.push(Function {
                name: NONDET.into(),
                params: vec![],
                returns: vec![Param { name: String::new(), ty: SolType::Bool, enum_name: None, loc: DataLoc::Default }],
                body: None,
                modifiers: vec![],
                visibility: Visibility::Internal,
                is_constructor: false,
                span: Span::default(),
            });
        }
    }
    Ok(Instrumented { program: typecheck(&prog)?, origins, unconstrained })
}

// ---- runtime checks ----

/// Negation normal form: negations only on atoms; `==>` eliminated.
pub fn nnf(e: &Expr) -> Expr {
    to_nnf(e, false)
}

fn mk(kind: ExprKind, ty: SolType) -> Expr {
    Expr::typed(kind, ty)
}

fn to_nnf(e: &Expr, neg: bool) -> Expr {
    match &e.kind {
        ExprKind::Unary(UnOp::Not, a) => to_nnf(a, !neg),
        ExprKind::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
            let op = match (op, neg) {
                (BinOp::And, false) | (BinOp::Or, true) => BinOp::And,
                _ => BinOp::Or,
            };
            mk(ExprKind::Binary(op, Box::new(to_nnf(l, neg)), Box::new(to_nnf(r, neg))), SolType::Bool)
        }
        ExprKind::Binary(BinOp::Implies, l, r) => {
            // a ==> b  is  !a || b
            let op = if neg { BinOp::And } else { BinOp::Or };
            mk(ExprKind::Binary(op, Box::new(to_nnf(l, !neg)), Box::new(to_nnf(r, neg))), SolType::Bool)
        }
        ExprKind::Bool(b) => mk(ExprKind::Bool(*b != neg), SolType::Bool),
        _ => {
            if neg {
                Expr::not(e.clone())
            } else {
                e.clone()
            }
        }
    }
}

/// Replaces every `nondet()` literal of an NNF formula, positive or negated,
/// by `true`, then folds constants. The result is implied by the original
/// under every valuation of the `nondet()` calls.
pub fn eliminate_nondet(e: &Expr) -> Expr {
    fold(&replace_literals(&nnf(e)))
}

fn replace_literals(e: &Expr) -> Expr {
    match &e.kind {
        ExprKind::Nondet => Expr::boolean(true),
        ExprKind::Unary(UnOp::Not, a) if a.kind == ExprKind::Nondet => Expr::boolean(true),
        ExprKind::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
            mk(ExprKind::Binary(*op, Box::new(replace_literals(l)), Box::new(replace_literals(r))), SolType::Bool)
        }
        _ => e.clone(),
    }
}

fn fold(e: &Expr) -> Expr {
    match &e.kind {
        ExprKind::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
            let (l, r) = (fold(l), fold(r));
            let lit = |x: &Expr| match x.kind {
                ExprKind::Bool(b) => Some(b),
                _ => None,
            };
            match (op, lit(&l), lit(&r)) {
                (BinOp::And, Some(false), _) | (BinOp::And, _, Some(false)) => Expr::boolean(false),
                (BinOp::Or, Some(true), _) | (BinOp::Or, _, Some(true)) => Expr::boolean(true),
                (BinOp::And, Some(true), _) | (BinOp::Or, Some(false), _) => r,
                (BinOp::And, _, Some(true)) | (BinOp::Or, _, Some(false)) => l,
                _ => mk(ExprKind::Binary(*op, Box::new(l), Box::new(r)), SolType::Bool),
            }
        }
        _ => e.clone(),
    }
}

fn map_conditions(ss: &mut [Stmt], f: &dyn Fn(&Expr) -> Expr) {
    for s in ss {
        match &mut s.kind {
            StmtKind::Require(e) | StmtKind::Assert(e) => *e = f(e),
            StmtKind::If { then_branch, else_branch, .. } => {
                map_conditions(then_branch, f);
                map_conditions(else_branch, f);
            }
            StmtKind::While { body, .. } | StmtKind::Block(body) => map_conditions(body, f),
            _ => {}
        }
    }
}

/// The runtime-checking variant: every `require`/`assert` condition is put
/// in negation normal form and freed of `nondet()` calls.
pub fn make_runtime_checks(p: &TypedProgram) -> TypedProgram {
    let mut out = p.clone();
    for c in out.program.contracts.iter_mut() {
        for m in c.modifiers.iter_mut() {
            map_conditions(&mut m.pre, &eliminate_nondet);
            map_conditions(&mut m.post, &eliminate_nondet);
        }
        for f in std::iter::once(&mut c.constructor).chain(c.functions.iter_mut()) {
            if let Some(b) = &mut f.body {
                map_conditions(b, &eliminate_nondet);
            }
        }
    }
    out
}

/// Every `require`/`assert` condition of a program, in a fixed order.
pub fn conditions(p: &TypedProgram) -> Vec<Expr> {
    let mut out = vec![];
    let mut collect = |ss: &[Stmt]| {
        visit_stmts(ss, &mut |s| {
            if let StmtKind::Require(e) | StmtKind::Assert(e) = &s.kind {
                out.push(e.clone());
            }
        })
    };
    for c in &p.program.contracts {
        for m in &c.modifiers {
            collect(&m.pre);
            collect(&m.post);
        }
        for f in std::iter::once(&c.constructor).chain(c.functions.iter()) {
            if let Some(b) = &f.body {
                collect(b);
            }
        }
    }
    out
}

pub fn count_nondet(e: &Expr) -> usize {
    let mut n = 0;
    e.walk(&mut |x| {
        if x.kind == ExprKind::Nondet {
            n += 1;
        }
    });
    n
}

/// Truth-table check that `weak` is implied by `strong` for every
/// independent valuation of the `nondet()` calls in `strong`. Other boolean
/// atoms are treated as free propositional variables.
pub fn implied_for_all_nondet(strong: &Expr, weak: &Expr) -> bool {
    let mut atoms: Vec<Expr> = vec![];
    let mut collect = |e: &Expr| collect_atoms(e, &mut atoms);
    collect(strong);
    collect(weak);
    let k = count_nondet(strong);
    let n = atoms.len();
    assert!(n + k <= 20, "too many atoms for enumeration");
    for bits in 0u64..(1 << (n + k)) {
        let env: BTreeMap<usize, bool> = (0..n).map(|i| (i, bits >> i & 1 == 1)).collect();
        let nondet: Vec<bool> = (0..k).map(|i| bits >> (n + i) & 1 == 1).collect();
        let mut pos = 0;
        let s = eval_prop(strong, &atoms, &env, &nondet, &mut pos);
        let mut pos2 = 0;
        let w = eval_prop(weak, &atoms, &env, &[], &mut pos2);
        if s && !w {
            return false;
        }
    }
    true
}

fn collect_atoms(e: &Expr, atoms: &mut Vec<Expr>) {
    match &e.kind {
        ExprKind::Unary(UnOp::Not, a) => collect_atoms(a, atoms),
        ExprKind::Binary(BinOp::And | BinOp::Or | BinOp::Implies, l, r) => {
            collect_atoms(l, atoms);
            collect_atoms(r, atoms);
        }
        ExprKind::Bool(_) | ExprKind::Nondet => {}
        _ => {
            if !atoms.contains(e) {
                atoms.push(e.clone());
            }
        }
    }
}

fn eval_prop(e: &Expr, atoms: &[Expr], env: &BTreeMap<usize, bool>, nondet: &[bool], pos: &mut usize) -> bool {
    match &e.kind {
        ExprKind::Unary(UnOp::Not, a) => !eval_prop(a, atoms, env, nondet, pos),
        ExprKind::Binary(op @ (BinOp::And | BinOp::Or | BinOp::Implies), l, r) => {
            // Both sides are always evaluated so nondet positions stay aligned.
            let a = eval_prop(l, atoms, env, nondet, pos);
            let b = eval_prop(r, atoms, env, nondet, pos);
            match op {
                BinOp::And => a && b,
                BinOp::Or => a || b,
                _ => !a || b,
            }
        }
        ExprKind::Bool(b) => *b,
        ExprKind::Nondet => {
            let v = nondet[*pos];
            *pos += 1;
            v
        }
        _ => env[&atoms.iter().position(|a| a == e).expect("atom")],
    }
}
