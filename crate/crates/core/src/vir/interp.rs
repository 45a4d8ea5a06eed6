//! Reference interpreter for IR programs.
//!
//! Unwritten map entries read as the zero of their type. `New` and
//! `NewUnbounded` are executed natively. The quantified assumptions that
//! initialize nested containers are satisfied constructively: an assumption
//! `forall i :: !Alloc[m[v][i]]` installs a rule that hands out a fresh
//! reference the first time an entry is read, and the next `NewUnbounded`
//! marks all of those references as allocated. Every other quantifier is
//! evaluated over the finite set of values the state currently mentions.
//! An equality assumption on a map entry that was never written picks that
//! entry's initial value.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use super::ast::*;
use super::prelude::{ALLOC, NEW, NEW_UNBOUNDED};
use crate::sol::interp::{div, modulo};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Val {
    Int(BigInt),
    Bool(bool),
    /// Reference; `0` is null.
    Ref(u64),
    Map(MapVal),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MapDefault {
    Zero(IrType),
    /// Entries are materialized as fresh references under the given rule.
    Fresh(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MapVal {
    pub default: MapDefault,
    pub entries: BTreeMap<Val, Val>,
}

impl Val {
    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Val::Int(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Val::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_ref_id(&self) -> Option<u64> {
        match self {
            Val::Ref(r) => Some(*r),
            _ => None,
        }
    }
}

pub fn zero(t: &IrType) -> Val {
    match t {
        IrType::Int => Val::Int(BigInt::zero()),
        IrType::Bool => Val::Bool(false),
        IrType::Ref => Val::Ref(0),
        IrType::Map(_, v) => Val::Map(MapVal { default: MapDefault::Zero((**v).clone()), entries: BTreeMap::new() }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// Normal termination with the entry procedure's return values.
    Completed(Vec<Val>),
    AssertFailed(String),
    /// An assumption did not hold; the run is infeasible.
    Blocked,
    BudgetExhausted,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IrInterpError {
    #[error("nondeterminism tape exhausted")]
    TapeExhausted,
    #[error("unknown procedure `{0}`")]
    UnknownProcedure(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("type error: {0}")]
    Type(String),
}

/// Where the values of `havoc` come from.
#[derive(Debug, Clone)]
pub enum NondetSource {
    /// Each havoc consumes the next integer. Booleans are `!= 0`, references
    /// are the absolute value.
    Sequential(VecDeque<BigInt>),
    /// Values by havoc site (see [`havoc_sites`]); missing sites read zero.
    Keyed(HashMap<usize, Val>),
}

/// A value chosen for a havoc during a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HavocEvent {
    pub site: usize,
    pub var: String,
    pub value: Val,
}

#[derive(Debug, Clone, Default)]
struct FreshRule {
    sealed: bool,
    children: Vec<(String, usize)>,
    generated: Vec<u64>,
}

type R<T> = Result<T, IrInterpError>;

/// Numbers every `havoc` and every call to `New` in pre-order, procedure by
/// procedure. Keys are statement addresses within `p`.
pub fn havoc_sites(p: &IrProgram) -> HashMap<*const IrStmt, usize> {
    let mut out = HashMap::new();
    let mut n = 0;
    for proc in &p.procedures {
        proc.body.visit(&mut |s| {
            if matches!(s, IrStmt::Havoc(_)) || matches!(s, IrStmt::Call { proc, .. } if proc == NEW) {
                out.insert(s as *const IrStmt, n);
                n += 1;
            }
        });
    }
    out
}

struct Frame<'p> {
    proc: &'p IrProcedure,
    vars: HashMap<String, Val>,
}

pub struct IrInterp<'p> {
    prog: &'p IrProgram,
    pub globals: HashMap<String, Val>,
    pub havocs: Vec<HavocEvent>,
    rules: Vec<FreshRule>,
    next_ref: u64,
    nondet: NondetSource,
    budget: u64,
    steps: u64,
    sites: HashMap<*const IrStmt, usize>,
    ufs: HashMap<(String, Vec<Val>), Val>,
}

impl<'p> IrInterp<'p> {
    pub fn new(prog: &'p IrProgram, nondet: NondetSource) -> IrInterp<'p> {
        let globals = prog.globals.iter().map(|(n, t)| (n.clone(), zero(t))).collect();
        let mut it = IrInterp {
            prog,
            globals,
            havocs: vec![],
            rules: vec![],
            next_ref: 1,
            nondet,
            budget: 1_000_000,
            steps: 0,
            sites: havoc_sites(prog),
            ufs: HashMap::new(),
        };
        it.load_axioms();
        it
    }

    pub fn with_budget(mut self, b: u64) -> Self {
        self.budget = b;
        self
    }

    /// References invented by the interpreter start here, above any id a
    /// keyed source is expected to use.
    pub fn with_ref_base(mut self, base: u64) -> Self {
        self.next_ref = base;
        self
    }

    /// Ground axioms `F(c1, ..) == c` become a lookup table for `F`.
    fn load_axioms(&mut self) {
        for a in &self.prog.axioms {
            if let IrExpr::Binary(IrBinOp::Eq, l, r) = a {
                if let IrExpr::UF(f, args) = &**l {
                    let mut dummy = Frame { proc: &EMPTY_PROC, vars: HashMap::new() };
                    let vals: Option<Vec<Val>> = args.iter().map(|x| self.eval(x, &mut dummy).ok()).collect();
                    if let (Some(vals), Ok(v)) = (vals, self.eval(r, &mut dummy)) {
                        self.ufs.insert((f.clone(), vals), v);
                    }
                }
            }
        }
    }

    pub fn run(&mut self, entry: &str, args: Vec<Val>) -> R<Outcome> {
        let proc = self.prog.procedure(entry).ok_or_else(|| IrInterpError::UnknownProcedure(entry.into()))?;
        match self.invoke(proc, args)? {
            Ok(rets) => Ok(Outcome::Completed(rets)),
            Err(o) => Ok(o),
        }
    }

    /// Reads `root[k1]..[kn]` in the global state.
    pub fn read_global(&mut self, root: &str, keys: &[Val]) -> R<Val> {
        let mut frame = Frame { proc: &EMPTY_PROC, vars: HashMap::new() };
        self.read_path(root, keys, &mut frame)
    }

    fn invoke(&mut self, proc: &'p IrProcedure, args: Vec<Val>) -> R<Result<Vec<Val>, Outcome>> {
        let mut vars = HashMap::new();
        for ((n, _), v) in proc.params.iter().zip(args) {
            vars.insert(n.clone(), v);
        }
        for (n, t) in proc.returns.iter().chain(&proc.locals) {
            vars.insert(n.clone(), zero(t));
        }
        let mut frame = Frame { proc, vars };
        if let Some(o) = self.exec(&proc.body, &mut frame)? {
            return Ok(Err(o));
        }
        Ok(Ok(proc.returns.iter().map(|(n, _)| frame.vars[n].clone()).collect()))
    }

    fn var_type(&self, n: &str, frame: &Frame) -> R<IrType> {
        frame
            .proc
            .var_type(n)
            .or_else(|| self.prog.global_type(n))
            .cloned()
            .ok_or_else(|| IrInterpError::UnknownVariable(n.into()))
    }

    fn assign(&mut self, n: &str, v: Val, frame: &mut Frame) -> R<()> {
        if let Some(slot) = frame.vars.get_mut(n) {
            *slot = v;
        } else if let Some(slot) = self.globals.get_mut(n) {
            *slot = v;
        } else {
            return Err(IrInterpError::UnknownVariable(n.into()));
        }
        Ok(())
    }

    fn fresh_ref(&mut self) -> u64 {
        let r = self.next_ref;
        self.next_ref += 1;
        r
    }

    fn is_alloc(&mut self, r: u64) -> bool {
        matches!(self.read_global(ALLOC, &[Val::Ref(r)]), Ok(Val::Bool(true)))
    }

    fn set_alloc(&mut self, r: u64) {
        let mut frame = Frame { proc: &EMPTY_PROC, vars: HashMap::new() };
        let _ = self.write_path(ALLOC, &[Val::Ref(r)], Val::Bool(true), &mut frame);
    }

    fn next_nondet(&mut self, site: usize, var: &str, t: &IrType) -> R<Val> {
        let v = match &mut self.nondet {
            NondetSource::Sequential(q) => {
                let i = q.pop_front().ok_or(IrInterpError::TapeExhausted)?;
                match t {
                    IrType::Int => Val::Int(i),
                    IrType::Bool => Val::Bool(!i.is_zero()),
                    IrType::Ref => Val::Ref(i.abs().to_u64().unwrap_or(u64::MAX)),
                    IrType::Map(..) => return Err(IrInterpError::Unsupported(format!("havoc of map `{var}`"))),
                }
            }
            NondetSource::Keyed(m) => m.get(&site).cloned().unwrap_or_else(|| zero(t)),
        };
        self.havocs.push(HavocEvent { site, var: var.into(), value: v.clone() });
        Ok(v)
    }

    fn tick(&mut self) -> bool {
        self.steps += 1;
        self.steps > self.budget
    }

    fn exec(&mut self, s: &'p IrStmt, frame: &mut Frame<'p>) -> R<Option<Outcome>> {
        if self.tick() {
            return Ok(Some(Outcome::BudgetExhausted));
        }
        match s {
            IrStmt::Skip => {}
            IrStmt::Havoc(x) => {
                let t = self.var_type(x, frame)?;
                let site = self.sites.get(&(s as *const IrStmt)).copied().unwrap_or(usize::MAX);
                let v = self.next_nondet(site, x, &t)?;
                self.assign(x, v, frame)?;
            }
            IrStmt::Assign(x, e) => {
                let v = self.eval(e, frame)?;
                self.assign(x, v, frame)?;
            }
            IrStmt::Store { map, keys, value } => {
                let ks = keys.iter().map(|k| self.eval(k, frame)).collect::<R<Vec<_>>>()?;
                let v = self.eval(value, frame)?;
                self.write_path(map, &ks, v, frame)?;
            }
            IrStmt::Assume(e) => {
                if let IrExpr::Forall(vars, body) = e {
                    self.install_fresh_rule(vars, body, frame)?;
                } else {
                    self.pin_initial(e, frame)?;
                }
                if !self.truth(e, frame)? {
                    return Ok(Some(Outcome::Blocked));
                }
            }
            IrStmt::Assert(e, label) => {
                if !self.truth(e, frame)? {
                    return Ok(Some(Outcome::AssertFailed(label.clone())));
                }
            }
            IrStmt::Call { proc, args, rets } => {
                let vals = args.iter().map(|a| self.eval(a, frame)).collect::<R<Vec<_>>>()?;
                let results = if proc == NEW {
                    let site = self.sites.get(&(s as *const IrStmt)).copied().unwrap_or(usize::MAX);
                    let r = self.native_new(site)?;
                    vec![Val::Ref(r)]
                } else if proc == NEW_UNBOUNDED {
                    self.native_new_unbounded();
                    vec![]
                } else {
                    let p = self.prog.procedure(proc).ok_or_else(|| IrInterpError::UnknownProcedure(proc.clone()))?;
                    match self.invoke(p, vals)? {
                        Ok(r) => r,
                        Err(o) => return Ok(Some(o)),
                    }
                };
                for (n, v) in rets.iter().zip(results) {
                    self.assign(n, v, frame)?;
                }
            }
            IrStmt::Seq(v) => {
                for s in v {
                    if let Some(o) = self.exec(s, frame)? {
                        return Ok(Some(o));
                    }
                }
            }
            IrStmt::If(c, t, e) => {
                let b = self.truth(c, frame)?;
                return self.exec(if b { t } else { e }, frame);
            }
            IrStmt::While(c, b) => {
                while self.truth(c, frame)? {
                    if let Some(o) = self.exec(b, frame)? {
                        return Ok(Some(o));
                    }
                    if self.tick() {
                        return Ok(Some(Outcome::BudgetExhausted));
                    }
                }
            }
        }
        Ok(None)
    }

    /// `assume G[k] == c` on an entry that was never written chooses its
    /// initial value instead of blocking.
    fn pin_initial(&mut self, e: &'p IrExpr, frame: &mut Frame<'p>) -> R<()> {
        let IrExpr::Binary(IrBinOp::Eq, lhs, rhs) = e else { return Ok(()) };
        let IrExpr::Select(m, keys) = &**lhs else { return Ok(()) };
        let (IrExpr::Var(g), [k]) = (&**m, keys.as_slice()) else { return Ok(()) };
        if frame.vars.contains_key(g.as_str()) {
            return Ok(());
        }
        let key = self.eval(k, frame)?;
        let value = self.eval(rhs, frame)?;
        if let Some(Val::Map(gm)) = self.globals.get_mut(g) {
            if matches!(gm.default, MapDefault::Zero(_)) && !gm.entries.contains_key(&key) {
                gm.entries.insert(key, value);
            }
        }
        Ok(())
    }

    fn native_new(&mut self, site: usize) -> R<u64> {
        let keyed = match &self.nondet {
            NondetSource::Keyed(m) => m.get(&site).and_then(Val::as_ref_id),
            NondetSource::Sequential(_) => None,
        };
        let r = match keyed {
            Some(r) if r != 0 && !self.is_alloc(r) => r,
            _ => {
                let mut r = self.fresh_ref();
                while self.is_alloc(r) {
                    r = self.fresh_ref();
                }
                r
            }
        };
        self.havocs.push(HavocEvent { site, var: "ret".into(), value: Val::Ref(r) });
        self.set_alloc(r);
        Ok(r)
    }

    fn native_new_unbounded(&mut self) {
        let mut newly = vec![];
        for rule in &mut self.rules {
            if !rule.sealed {
                rule.sealed = true;
                newly.extend(rule.generated.iter().copied());
            }
        }
        for r in newly {
            self.set_alloc(r);
        }
    }

    /// Recognizes `forall i1..ij :: !Alloc[chi(v, i1..ij)]` and installs the
    /// matching fresh-entry rule.
    fn install_fresh_rule(&mut self, vars: &[(String, IrType)], body: &IrExpr, frame: &mut Frame<'p>) -> R<()> {
        let IrExpr::Unary(IrUnOp::Not, inner) = body else { return Ok(()) };
        let IrExpr::Select(a, ks) = &**inner else { return Ok(()) };
        if !matches!(&**a, IrExpr::Var(n) if n == ALLOC) || ks.len() != 1 {
            return Ok(());
        }
        let names: Vec<&str> = vars.iter().map(|(n, _)| n.as_str()).collect();
        let Some((base, maps)) = chain(&ks[0], &names) else { return Ok(()) };
        let Val::Ref(v) = self.eval(base, frame)? else { return Ok(()) };
        let id = self.rules.len();
        self.rules.push(FreshRule::default());
        if maps.len() == 1 {
            self.set_default(&maps[0], v, MapDefault::Fresh(id));
            return Ok(());
        }
        // Find the rule governing the parent level.
        let Some(Val::Map(m)) = self.globals.get(maps[0]).and_then(|g| match g {
            Val::Map(g) => g.entries.get(&Val::Ref(v)).cloned(),
            _ => None,
        }) else {
            return Ok(());
        };
        let MapDefault::Fresh(mut parent) = m.default else { return Ok(()) };
        for lvl in &maps[1..maps.len() - 1] {
            match self.rules[parent].children.iter().find(|(n, _)| n == lvl) {
                Some((_, c)) => parent = *c,
                None => return Ok(()),
            }
        }
        let last = maps[maps.len() - 1].to_string();
        self.rules[parent].children.push((last.clone(), id));
        for q in self.rules[parent].generated.clone() {
            self.set_default(&last, q, MapDefault::Fresh(id));
        }
        Ok(())
    }

    fn set_default(&mut self, map: &str, key: u64, d: MapDefault) {
        if let Some(Val::Map(g)) = self.globals.get_mut(map) {
            if let MapDefault::Zero(IrType::Map(_, inner)) = &g.default {
                let inner = (**inner).clone();
                let e = g.entries.entry(Val::Ref(key)).or_insert_with(|| zero(&IrType::map(IrType::Int, inner)));
                if let Val::Map(m) = e {
                    m.default = d;
                }
            }
        }
    }

    fn truth(&mut self, e: &IrExpr, frame: &mut Frame<'p>) -> R<bool> {
        self.eval(e, frame)?.as_bool().ok_or_else(|| IrInterpError::Type(format!("`{e}` is not boolean")))
    }

    fn int(&mut self, e: &IrExpr, frame: &mut Frame<'p>) -> R<BigInt> {
        match self.eval(e, frame)? {
            Val::Int(i) => Ok(i),
            _ => Err(IrInterpError::Type(format!("`{e}` is not an integer"))),
        }
    }

    fn lookup_var(&self, n: &str, frame: &Frame) -> R<Val> {
        if let Some(v) = frame.vars.get(n) {
            return Ok(v.clone());
        }
        if let Some(v) = self.globals.get(n) {
            return Ok(v.clone());
        }
        if let Some(c) = self.prog.const_value(n) {
            return Ok(Val::Int(c.clone()));
        }
        Err(IrInterpError::UnknownVariable(n.into()))
    }

    fn eval(&mut self, e: &IrExpr, frame: &mut Frame<'p>) -> R<Val> {
        Ok(match e {
            IrExpr::Int(i) => Val::Int(i.clone()),
            IrExpr::Bool(b) => Val::Bool(*b),
            IrExpr::Null => Val::Ref(0),
            IrExpr::Var(n) => self.lookup_var(n, frame)?,
            IrExpr::Unary(IrUnOp::Not, a) => Val::Bool(!self.truth(a, frame)?),
            IrExpr::Unary(IrUnOp::Neg, a) => Val::Int(-self.int(a, frame)?),
            IrExpr::Binary(op, l, r) => match op {
                IrBinOp::And => Val::Bool(self.truth(l, frame)? && self.truth(r, frame)?),
                IrBinOp::Or => Val::Bool(self.truth(l, frame)? || self.truth(r, frame)?),
                IrBinOp::Implies => Val::Bool(!self.truth(l, frame)? || self.truth(r, frame)?),
                IrBinOp::Eq => Val::Bool(self.eval(l, frame)? == self.eval(r, frame)?),
                IrBinOp::Ne => Val::Bool(self.eval(l, frame)? != self.eval(r, frame)?),
                _ => {
                    let (a, b) = (self.int(l, frame)?, self.int(r, frame)?);
                    match op {
                        IrBinOp::Add => Val::Int(a + b),
                        IrBinOp::Sub => Val::Int(a - b),
                        IrBinOp::Mul => Val::Int(a * b),
                        IrBinOp::Div => Val::Int(div(&a, &b)),
                        IrBinOp::Mod => Val::Int(modulo(&a, &b)),
                        IrBinOp::Lt => Val::Bool(a < b),
                        IrBinOp::Le => Val::Bool(a <= b),
                        IrBinOp::Gt => Val::Bool(a > b),
                        IrBinOp::Ge => Val::Bool(a >= b),
                        _ => unreachable!(),
                    }
                }
            },
            IrExpr::UF(f, args) => {
                let vals = args.iter().map(|a| self.eval(a, frame)).collect::<R<Vec<_>>>()?;
                self.ufs
                    .get(&(f.clone(), vals))
                    .cloned()
                    .ok_or_else(|| IrInterpError::Unsupported(format!("no interpretation for `{e}`")))?
            }
            IrExpr::Select(base, keys) => {
                let ks = keys.iter().map(|k| self.eval(k, frame)).collect::<R<Vec<_>>>()?;
                match &**base {
                    IrExpr::Var(root) => self.read_path(root, &ks, frame)?,
                    _ => return Err(IrInterpError::Unsupported(format!("select from `{base}`"))),
                }
            }
            IrExpr::Forall(vars, body) => Val::Bool(self.eval_forall(vars, body, frame)?),
        })
    }

    fn read_path(&mut self, root: &str, keys: &[Val], frame: &mut Frame) -> R<Val> {
        let in_frame = frame.vars.contains_key(root);
        let slot = if in_frame { frame.vars.get_mut(root) } else { self.globals.get_mut(root) };
        let Some(slot) = slot else {
            return Err(IrInterpError::UnknownVariable(root.into()));
        };
        if keys.is_empty() {
            return Ok(slot.clone());
        }
        let mut effects = vec![];
        let mut cur: &mut Val = slot;
        let mut result = None;
        for (idx, k) in keys.iter().enumerate() {
            let Val::Map(m) = cur else {
                return Err(IrInterpError::Type(format!("`{root}` indexed too deeply")));
            };
            let last = idx + 1 == keys.len();
            if !m.entries.contains_key(k) {
                match &m.default {
                    MapDefault::Zero(t) if last => {
                        result = Some(zero(t));
                        break;
                    }
                    MapDefault::Zero(t) => {
                        let z = zero(t);
                        m.entries.insert(k.clone(), z);
                    }
                    MapDefault::Fresh(rule) => {
                        let q = self.next_ref;
                        self.next_ref += 1;
                        self.rules[*rule].generated.push(q);
                        effects.push((q, *rule));
                        m.entries.insert(k.clone(), Val::Ref(q));
                    }
                }
            }
            if last {
                result = Some(m.entries[k].clone());
                break;
            }
            cur = m.entries.get_mut(k).unwrap();
        }
        let out = result.expect("non-empty path yields a value");
        for (q, rule) in effects {
            if self.rules[rule].sealed {
                self.set_alloc(q);
            }
            for (child, cid) in self.rules[rule].children.clone() {
                self.set_default(&child, q, MapDefault::Fresh(cid));
            }
        }
        Ok(out)
    }

    fn write_path(&mut self, root: &str, keys: &[Val], v: Val, frame: &mut Frame) -> R<()> {
        let in_frame = frame.vars.contains_key(root);
        let slot = if in_frame { frame.vars.get_mut(root) } else { self.globals.get_mut(root) };
        let Some(mut cur) = slot else {
            return Err(IrInterpError::UnknownVariable(root.into()));
        };
        for k in keys {
            let Val::Map(m) = cur else {
                return Err(IrInterpError::Type(format!("`{root}` indexed too deeply")));
            };
            if !m.entries.contains_key(k) {
                let z = match &m.default {
                    MapDefault::Zero(t) => zero(t),
                    MapDefault::Fresh(_) => Val::Ref(0),
                };
                m.entries.insert(k.clone(), z);
            }
            cur = m.entries.get_mut(k).unwrap();
        }
        *cur = v;
        Ok(())
    }

    /// Values of type `t` the current state mentions.
    fn domain(&self, t: &IrType, frame: &Frame) -> Vec<Val> {
        match t {
            IrType::Bool => vec![Val::Bool(false), Val::Bool(true)],
            IrType::Map(..) => vec![],
            _ => {
                let mut set = BTreeSet::new();
                match t {
                    IrType::Int => {
                        set.insert(Val::Int(BigInt::zero()));
                        set.insert(Val::Int(1.into()));
                    }
                    _ => {
                        set.insert(Val::Ref(0));
                    }
                }
                let want_int = *t == IrType::Int;
                for v in self.globals.values().chain(frame.vars.values()) {
                    collect(v, want_int, &mut set);
                }
                for r in &self.rules {
                    if !want_int {
                        set.extend(r.generated.iter().map(|q| Val::Ref(*q)));
                    }
                }
                set.into_iter().collect()
            }
        }
    }

    fn eval_forall(&mut self, vars: &[(String, IrType)], body: &IrExpr, frame: &mut Frame<'p>) -> R<bool> {
        if let Some(r) = self.eval_distinct(vars, body, frame)? {
            return Ok(r);
        }
        let doms: Vec<Vec<Val>> = vars.iter().map(|(_, t)| self.domain(t, frame)).collect();
        let saved: Vec<Option<Val>> = vars.iter().map(|(n, _)| frame.vars.get(n).cloned()).collect();
        let mut idx = vec![0usize; vars.len()];
        let result = 'outer: loop {
            if doms.iter().any(|d| d.is_empty()) {
                break true;
            }
            for ((n, _), (d, i)) in vars.iter().zip(doms.iter().zip(&idx)) {
                frame.vars.insert(n.clone(), d[*i].clone());
            }
            if !self.truth(body, frame)? {
                break false;
            }
            let mut k = vars.len();
            loop {
                if k == 0 {
                    break 'outer true;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < doms[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        };
        restore(frame, vars, saved);
        Ok(result)
    }

    /// `forall i.., j.. :: (i1 == j1 && ..) || e(i..) != e(j..)`: checks that
    /// `e` is injective on the domain without enumerating pairs.
    fn eval_distinct(&mut self, vars: &[(String, IrType)], body: &IrExpr, frame: &mut Frame<'p>) -> R<Option<bool>> {
        let IrExpr::Binary(IrBinOp::Or, same, diff) = body else { return Ok(None) };
        let IrExpr::Binary(IrBinOp::Ne, a, b) = &**diff else { return Ok(None) };
        let half = vars.len() / 2;
        if vars.len() % 2 != 0 || half == 0 {
            return Ok(None);
        }
        let (is, js) = vars.split_at(half);
        let expected = IrExpr::conj(is.iter().zip(js).map(|((x, _), (y, _))| IrExpr::eq(IrExpr::var(x), IrExpr::var(y))).collect());
        let renamed = a.subst(&|n| js.iter().zip(is).find(|(_, (x, _))| x == n).map(|((y, _), _)| IrExpr::var(y)));
        if **same != expected || renamed != **b {
            return Ok(None);
        }
        let doms: Vec<Vec<Val>> = is.iter().map(|(_, t)| self.domain(t, frame)).collect();
        let saved: Vec<Option<Val>> = is.iter().map(|(n, _)| frame.vars.get(n).cloned()).collect();
        let mut seen = BTreeSet::new();
        let mut ok = true;
        let mut tuples: Vec<Vec<Val>> = vec![vec![]];
        for d in &doms {
            tuples = tuples.into_iter().flat_map(|t| d.iter().map(move |x| [t.clone(), vec![x.clone()]].concat())).collect();
        }
        for t in tuples {
            for ((n, _), x) in is.iter().zip(t) {
                frame.vars.insert(n.clone(), x);
            }
            if !seen.insert(self.eval(a, frame)?) {
                ok = false;
                break;
            }
        }
        restore(frame, is, saved);
        Ok(Some(ok))
    }
}

fn restore(frame: &mut Frame, vars: &[(String, IrType)], saved: Vec<Option<Val>>) {
    for ((n, _), old) in vars.iter().zip(saved) {
        match old {
            Some(v) => {
                frame.vars.insert(n.clone(), v);
            }
            None => {
                frame.vars.remove(n);
            }
        }
    }
}

fn collect(v: &Val, want_int: bool, out: &mut BTreeSet<Val>) {
    match v {
        Val::Int(_) if want_int => {
            out.insert(v.clone());
        }
        Val::Ref(_) if !want_int => {
            out.insert(v.clone());
        }
        Val::Map(m) => {
            for (k, x) in &m.entries {
                collect(k, want_int, out);
                collect(x, want_int, out);
            }
        }
        _ => {}
    }
}

/// Splits `M_j[..M_1[base][x1]..][xj]` into `base` and `[M_1, .., M_j]`,
/// requiring the index variables to be exactly `names` in order.
fn chain<'e>(e: &'e IrExpr, names: &[&str]) -> Option<(&'e IrExpr, Vec<&'e str>)> {
    let (last, rest) = names.split_last()?;
    let IrExpr::Select(m, ks) = e else { return None };
    let IrExpr::Var(mname) = &**m else { return None };
    if ks.len() != 2 || !matches!(&ks[1], IrExpr::Var(x) if x == last) {
        return None;
    }
    if rest.is_empty() {
        let mut free = true;
        ks[0].walk(&mut |x| {
            if matches!(x, IrExpr::Var(n) if names.contains(&n.as_str())) {
                free = false;
            }
        });
        return free.then(|| (&ks[0], vec![mname.as_str()]));
    }
    let (base, mut maps) = chain(&ks[0], rest)?;
    maps.push(mname.as_str());
    Some((base, maps))
}

static EMPTY_PROC: IrProcedure =
    IrProcedure { name: String::new(), params: vec![], returns: vec![], locals: vec![], body: IrStmt::Skip };

#[cfg(test)]
mod tests {
    use super::super::parser::parse_program;
    use super::super::prelude::{map_init, prelude_globals, prelude_procedures, Level};
    use super::*;

    fn program(globals: &str, body: &str) -> IrProgram {
        let src = format!("{globals}\nprocedure main() returns (a: Ref, b: Ref, c: Ref, d: Ref) {{\n{body}\n}}");
        let mut p = parse_program(&src).unwrap();
        p.globals.extend(prelude_globals());
        p.procedures.extend(prelude_procedures());
        p.normalize();
        p
    }

    fn refs(o: Outcome) -> Vec<u64> {
        match o {
            Outcome::Completed(v) => v.iter().map(|x| x.as_ref_id().unwrap()).collect(),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn new_references_are_fresh_and_non_null() {
        let p = program("", "call a := New(); call b := New(); call c := New();");
        let mut it = IrInterp::new(&p, NondetSource::Sequential(VecDeque::new()));
        let r = refs(it.run("main", vec![]).unwrap());
        assert!(r[0] != 0 && r[1] != 0 && r[2] != 0);
        assert!(r[0] != r[1] && r[1] != r[2] && r[0] != r[2]);
        for x in &r[..3] {
            assert_eq!(it.read_global(ALLOC, &[Val::Ref(*x)]).unwrap(), Val::Bool(true));
        }
    }

    #[test]
    fn nested_init_gives_distinct_allocated_zeroed_children() {
        let levels = vec![
            Level { map: "M_int_Ref".into(), key: IrType::Int },
            Level { map: "M_int_int".into(), key: IrType::Int },
        ];
        let mut body = "call a := New(); assume Length[a] == 0;\n".to_string();
        for s in map_init(&IrExpr::var("a"), &levels, IrExpr::int(0)) {
            body.push_str(&format!("{s}\n"));
        }
        body.push_str("b := M_int_Ref[a][0]; c := M_int_Ref[a][1]; M_int_int[b][5] := 7; call d := New();");
        let p = program("var M_int_Ref: [Ref][int]Ref; var M_int_int: [Ref][int]int;", &body);
        let mut it = IrInterp::new(&p, NondetSource::Sequential(VecDeque::new()));
        let r = refs(it.run("main", vec![]).unwrap());
        let (a, b, c, d) = (r[0], r[1], r[2], r[3]);
        let all: BTreeSet<u64> = [a, b, c, d].into_iter().collect();
        assert_eq!(all.len(), 4, "{r:?}");
        assert!(!all.contains(&0));
        for x in [b, c] {
            assert_eq!(it.read_global(ALLOC, &[Val::Ref(x)]).unwrap(), Val::Bool(true));
            assert_eq!(it.read_global("Length", &[Val::Ref(x)]).unwrap(), Val::Int(0.into()));
        }
        assert_eq!(it.read_global("M_int_int", &[Val::Ref(c), Val::Int(5.into())]).unwrap(), Val::Int(0.into()));
        assert_eq!(it.read_global("M_int_int", &[Val::Ref(b), Val::Int(5.into())]).unwrap(), Val::Int(7.into()));
    }

    #[test]
    fn three_level_init_materializes_grandchildren() {
        let levels = vec![
            Level { map: "M_int_Ref".into(), key: IrType::Int },
            Level { map: "M_int_Ref".into(), key: IrType::Int },
            Level { map: "M_int_int".into(), key: IrType::Int },
        ];
        let mut body = "call a := New();\n".to_string();
        for s in map_init(&IrExpr::var("a"), &levels, IrExpr::int(0)) {
            body.push_str(&format!("{s}\n"));
        }
        body.push_str("b := M_int_Ref[M_int_Ref[a][0]][0]; c := M_int_Ref[M_int_Ref[a][1]][0]; d := M_int_Ref[a][0];");
        let p = program("var M_int_Ref: [Ref][int]Ref; var M_int_int: [Ref][int]int;", &body);
        let mut it = IrInterp::new(&p, NondetSource::Sequential(VecDeque::new()));
        let r = refs(it.run("main", vec![]).unwrap());
        assert!(r[1] != 0 && r[2] != 0 && r[1] != r[2] && r[1] != r[3], "{r:?}");
        assert_eq!(it.read_global(ALLOC, &[Val::Ref(r[1])]).unwrap(), Val::Bool(true));
    }

    #[test]
    fn assume_blocks_and_assert_fails() {
        let p = program("", "havoc a; assume a != null; assert {:msg \"L1\"} a == null;");
        let mut it = IrInterp::new(&p, NondetSource::Sequential(VecDeque::from(vec![BigInt::zero()])));
        assert_eq!(it.run("main", vec![]).unwrap(), Outcome::Blocked);
        let mut it = IrInterp::new(&p, NondetSource::Sequential(VecDeque::from(vec![BigInt::from(3)])));
        assert_eq!(it.run("main", vec![]).unwrap(), Outcome::AssertFailed("L1".into()));
        let mut it = IrInterp::new(&p, NondetSource::Sequential(VecDeque::new()));
        assert_eq!(it.run("main", vec![]), Err(IrInterpError::TapeExhausted));
    }

    #[test]
    fn budget_stops_infinite_loop() {
        let p = program("", "while (true) { }");
        let mut it = IrInterp::new(&p, NondetSource::Sequential(VecDeque::new())).with_budget(100);
        assert_eq!(it.run("main", vec![]).unwrap(), Outcome::BudgetExhausted);
    }

    #[test]
    fn euclidean_division_and_uf_axioms() {
        let src = "function StrToInt(int): int;\naxiom StrToInt(1) == 1;\n\
                   procedure main() returns (x: int, y: int, z: int) { x := -7 div 2; y := -7 mod 2; z := StrToInt(1) + 5 div 0; }";
        let p = parse_program(src).unwrap();
        let mut it = IrInterp::new(&p, NondetSource::Sequential(VecDeque::new()));
        let o = it.run("main", vec![]).unwrap();
        assert_eq!(o, Outcome::Completed(vec![Val::Int((-4).into()), Val::Int(1.into()), Val::Int(1.into())]));
    }

    #[test]
    fn keyed_source_by_site() {
        let p = program("", "havoc a; havoc b;");
        // Sites are numbered in procedure order: New, NewUnbounded, main.
        let keyed: HashMap<usize, Val> = [(3, Val::Ref(9))].into_iter().collect();
        let mut it = IrInterp::new(&p, NondetSource::Keyed(keyed));
        let r = refs(it.run("main", vec![]).unwrap());
        assert_eq!((r[0], r[1]), (0, 9));
    }
}
