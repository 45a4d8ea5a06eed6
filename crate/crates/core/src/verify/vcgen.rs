//! Verification conditions for loop-free, call-free procedures.
//!
//! Every variable write gets a fresh SMT symbol (single assignment) and a
//! path condition is threaded forward through branches; this computes the
//! same formula as a weakest precondition over the passified program.
//! Assumptions become `path => e` constraints. Each assertion gets a flag
//! that holds exactly when execution reaches it and it fails, so one
//! model tells which assertion is violated. Later assertions assume
//! earlier ones held.
//!
//! Assumed quantifiers whose bound variables all occur as map keys are
//! not passed to the solver. They are instantiated with every ground term
//! the formula uses at the same key position of the same map, which keeps
//! queries quantifier-free. The instances are implied by the quantifier,
//! so an unsat answer still proves the assertions; a model is checked by
//! replaying it.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::vir::prelude::{ALLOC, NEW, NEW_UNBOUNDED};
use crate::vir::{IrBinOp, IrExpr, IrProcedure, IrProgram, IrStmt, IrType, IrUnOp};

use super::smt::{Model, ModelValue, SmtQuery};
use super::VerifyError;

pub type Sites = HashMap<*const IrStmt, usize>;

/// A nondeterministic choice of the encoded procedure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HavocVar {
    pub site: usize,
    pub var: String,
    pub symbol: String,
    pub ty: IrType,
}

#[derive(Debug, Clone)]
pub struct Vc {
    /// Declarations and constraints, without a goal.
    pub body: String,
    /// Violation flag symbol and assertion label, in program order.
    pub violations: Vec<(String, String)>,
    pub havocs: Vec<HavocVar>,
    pub symbols: HashMap<String, String>,
}

impl Vc {
    /// A query that is satisfiable iff one of the selected assertions
    /// (all, when `only` is `None`) can fail.
    pub fn query(&self, name: &str, only: Option<&dyn Fn(&str) -> bool>) -> SmtQuery {
        let flags: Vec<&str> = self
            .violations
            .iter()
            .filter(|(_, l)| only.map_or(true, |f| f(l)))
            .map(|(s, _)| s.as_str())
            .collect();
        let goal = match flags.len() {
            0 => "false".to_string(),
            1 => flags[0].to_string(),
            _ => format!("(or {})", flags.join(" ")),
        };
        SmtQuery {
            name: name.to_string(),
            script: format!("{}(assert {goal})\n(check-sat)\n(get-model)\n(exit)\n", self.body),
            symbols: self.symbols.clone(),
        }
    }

    /// Labels of the assertions the model violates.
    pub fn violated(&self, m: &Model) -> Vec<String> {
        self.violations
            .iter()
            .filter(|(s, _)| m.get(s.trim_matches('|')) == Some(&ModelValue::Bool(true)))
            .map(|(_, l)| l.clone())
            .collect()
    }
}

pub fn sort(t: &IrType) -> String {
    match t {
        IrType::Int => "Int".into(),
        IrType::Bool => "Bool".into(),
        IrType::Ref => "Ref".into(),
        IrType::Map(k, v) => format!("(Array {} {})", sort(k), sort(v)),
    }
}


fn int_lit(i: &num_bigint::BigInt) -> String {
    if i.sign() == num_bigint::Sign::Minus {
        format!("(- {})", -i)
    } else {
        i.to_string()
    }
}

struct Enc<'a> {
    prog: &'a IrProgram,
    types: HashMap<String, IrType>,
    sites: &'a Sites,
    out: String,
    n: usize,
    env: HashMap<String, String>,
    pc: String,
    violations: Vec<(String, String)>,
    havocs: Vec<HavocVar>,
    symbols: HashMap<String, String>,
    /// Ground key terms seen per map and key position.
    pool: RefCell<BTreeMap<Slot, BTreeSet<String>>>,
    quants: Vec<Quant>,
}

/// A key position: the map's IR name and the index among its keys.
type Slot = (String, usize);

/// An assumed universal statement, instantiated on ground key terms once
/// the whole body is encoded.
struct Quant {
    pc: String,
    /// Bound placeholder and the key positions it occupies.
    vars: Vec<(String, Vec<Slot>)>,
    body: String,
    /// Key terms of `body`, mentioning placeholders.
    keys: Vec<(Slot, String)>,
}

fn placeholder(n: &str) -> String {
    format!("|?{n}|")
}

impl<'a> Enc<'a> {
    fn note_key(&self, map: &str, pos: usize, key: &str) {
        if !key.contains("|?") {
            self.pool.borrow_mut().entry((map.to_string(), pos)).or_default().insert(key.to_string());
        }
    }

    fn name(&mut self, base: &str) -> String {
        self.n += 1;
        let s = format!("|{base}@{}|", self.n);
        self.symbols.insert(s.trim_matches('|').to_string(), base.to_string());
        s
    }

    fn declare(&mut self, base: &str, t: &IrType) -> String {
        let s = self.name(base);
        let _ = writeln!(self.out, "(declare-fun {s} () {})", sort(t));
        s
    }

    fn define(&mut self, base: &str, t: &IrType, term: String) -> String {
        let s = self.name(base);
        let _ = writeln!(self.out, "(define-fun {s} () {} {term})", sort(t));
        s
    }

    fn ty(&self, x: &str) -> Result<IrType, VerifyError> {
        self.types.get(x).cloned().ok_or_else(|| VerifyError::UnknownVariable(x.to_string()))
    }

    fn expr(&self, e: &IrExpr, bound: &[String]) -> Result<String, VerifyError> {
        Ok(match e {
            IrExpr::Int(i) => int_lit(i),
            IrExpr::Bool(b) => b.to_string(),
            IrExpr::Null => "null".into(),
            IrExpr::Var(n) if bound.contains(n) => format!("|?{n}|"),
            IrExpr::Var(n) => match self.prog.const_value(n) {
                Some(v) => int_lit(v),
                None => self.env.get(n).cloned().ok_or_else(|| VerifyError::UnknownVariable(n.clone()))?,
            },
            IrExpr::Unary(IrUnOp::Not, a) => format!("(not {})", self.expr(a, bound)?),
            IrExpr::Unary(IrUnOp::Neg, a) => format!("(- {})", self.expr(a, bound)?),
            IrExpr::Binary(op, a, b) => {
                let (a, b) = (self.expr(a, bound)?, self.expr(b, bound)?);
                match op {
                    IrBinOp::Div => format!("(ite (= {b} 0) 0 (div {a} {b}))"),
                    IrBinOp::Mod => format!("(ite (= {b} 0) 0 (mod {a} {b}))"),
                    IrBinOp::Ne => format!("(not (= {a} {b}))"),
                    IrBinOp::Add => format!("(+ {a} {b})"),
                    IrBinOp::Sub => format!("(- {a} {b})"),
                    IrBinOp::Mul => format!("(* {a} {b})"),
                    IrBinOp::Lt => format!("(< {a} {b})"),
                    IrBinOp::Le => format!("(<= {a} {b})"),
                    IrBinOp::Gt => format!("(> {a} {b})"),
                    IrBinOp::Ge => format!("(>= {a} {b})"),
                    IrBinOp::Eq => format!("(= {a} {b})"),
                    IrBinOp::And => format!("(and {a} {b})"),
                    IrBinOp::Or => format!("(or {a} {b})"),
                    IrBinOp::Implies => format!("(=> {a} {b})"),
                }
            }
            IrExpr::UF(f, args) => {
                let args = args.iter().map(|a| self.expr(a, bound)).collect::<Result<Vec<_>, _>>()?;
                format!("({f} {})", args.join(" "))
            }
            IrExpr::Select(m, keys) => {
                let mut s = self.expr(m, bound)?;
                for (i, k) in keys.iter().enumerate() {
                    let k = self.expr(k, bound)?;
                    if let IrExpr::Var(n) = &**m {
                        self.note_key(n, i, &k);
                    }
                    s = format!("(select {s} {k})");
                }
                s
            }
            IrExpr::Forall(vars, body) => {
                let mut inner = bound.to_vec();
                inner.extend(vars.iter().map(|(n, _)| n.clone()));
                let decls: Vec<String> = vars.iter().map(|(n, t)| format!("(|?{n}| {})", sort(t))).collect();
                let b = self.expr(body, &inner)?;
                let pats = self.patterns(body, vars, &inner)?;
                if pats.is_empty() {
                    format!("(forall ({}) {b})", decls.join(" "))
                } else {
                    format!("(forall ({}) (! {b} {}))", decls.join(" "), pats.join(" "))
                }
            }
        })
    }

    /// Trigger candidates: the outermost map reads that mention bound
    /// variables.
    fn patterns(&self, body: &IrExpr, vars: &[(String, IrType)], bound: &[String]) -> Result<Vec<String>, VerifyError> {
        let names: BTreeSet<&str> = vars.iter().map(|(n, _)| n.as_str()).collect();
        let mut terms: Vec<(&IrExpr, BTreeSet<String>)> = vec![];
        collect_selects(body, &names, &mut terms);
        let covering: Vec<_> = terms.iter().filter(|(_, fv)| fv.len() == names.len()).collect();
        if !covering.is_empty() {
            return covering.iter().map(|(t, _)| Ok(format!(":pattern ({})", self.expr(t, bound)?))).collect();
        }
        let all: BTreeSet<&String> = terms.iter().flat_map(|(_, fv)| fv).collect();
        if all.len() == names.len() && !terms.is_empty() {
            let ts = terms.iter().map(|(t, _)| self.expr(t, bound)).collect::<Result<Vec<_>, _>>()?;
            return Ok(vec![format!(":pattern ({})", ts.join(" "))]);
        }
        Ok(vec![])
    }

    /// Executions reaching here with `c` false are discarded. Stated as a
    /// top-level implication so quantifiers keep positive polarity.
    fn assume(&mut self, c: String) {
        let _ = writeln!(self.out, "(assert (=> {} {c}))", self.pc);
    }

    fn narrow(&mut self, c: String) {
        let pc = format!("(and {} {c})", self.pc);
        self.pc = self.define("pc", &IrType::Bool, pc);
    }

    /// Whether every bound variable of `forall vars :: body` is used as a
    /// map key, so ground instances over the key pool can replace it.
    fn instantiable(&self, vars: &[(String, IrType)], body: &IrExpr) -> bool {
        let mut nested = false;
        body.walk(&mut |x| nested |= matches!(x, IrExpr::Forall(..)));
        !nested
            && vars.iter().all(|(n, _)| {
                let mut used = false;
                body.walk(&mut |x| {
                    if let IrExpr::Select(m, ks) = x {
                        used |= matches!(&**m, IrExpr::Var(_)) && ks.iter().any(|k| *k == IrExpr::var(n));
                    }
                });
                used
            })
    }

    /// Emits the instances of every assumed quantifier over the key pool,
    /// repeating while instances contribute new keys.
    fn instantiate(&mut self) {
        let mut done: BTreeSet<(usize, Vec<String>)> = BTreeSet::new();
        for _ in 0..INSTANTIATION_ROUNDS {
            let pool = self.pool.borrow().clone();
            let mut fresh = vec![];
            for (qi, q) in self.quants.iter().enumerate() {
                let choices: Vec<Vec<String>> = q
                    .vars
                    .iter()
                    .map(|(_, slots)| {
                        let terms: BTreeSet<&String> = slots.iter().filter_map(|s| pool.get(s)).flatten().collect();
                        terms.into_iter().cloned().collect()
                    })
                    .collect();
                for tuple in product(&choices) {
                    if !done.insert((qi, tuple.clone())) {
                        continue;
                    }
                    let subst = |t: &str| {
                        q.vars.iter().zip(&tuple).fold(t.to_string(), |acc, ((ph, _), v)| acc.replace(ph.as_str(), v))
                    };
                    fresh.push(format!("(assert (=> {} {}))", q.pc, subst(&q.body)));
                    for (slot, k) in &q.keys {
                        self.note_key(&slot.0, slot.1, &subst(k));
                    }
                }
            }
            if fresh.is_empty() {
                break;
            }
            for f in fresh {
                self.out.push_str(&f);
                self.out.push('\n');
            }
        }
    }

    fn site(&self, s: &IrStmt) -> usize {
        self.sites.get(&(s as *const IrStmt)).copied().unwrap_or(usize::MAX)
    }

    fn stmt(&mut self, s: &IrStmt) -> Result<(), VerifyError> {
        match s {
            IrStmt::Skip => {}
            IrStmt::Havoc(x) => {
                let t = self.ty(x)?;
                let sym = self.declare(x, &t);
                if !matches!(t, IrType::Map(..)) {
                    self.havocs.push(HavocVar { site: self.site(s), var: x.clone(), symbol: sym.clone(), ty: t });
                }
                self.env.insert(x.clone(), sym);
            }
            IrStmt::Assign(x, e) => {
                let t = self.ty(x)?;
                let v = self.expr(e, &[])?;
                let sym = self.define(x, &t, v);
                self.env.insert(x.clone(), sym);
            }
            IrStmt::Store { map, keys, value } => {
                let t = self.ty(map)?;
                let base = self.env.get(map).cloned().ok_or_else(|| VerifyError::UnknownVariable(map.clone()))?;
                let ks = keys.iter().map(|k| self.expr(k, &[])).collect::<Result<Vec<_>, _>>()?;
                let mut v = self.expr(value, &[])?;
                // store(m, k1, store(m[k1], k2, ... v))
                let mut prefixes = vec![base.clone()];
                for k in &ks[..ks.len() - 1] {
                    let p = prefixes.last().unwrap();
                    prefixes.push(format!("(select {p} {k})"));
                }
                for (i, k) in ks.iter().enumerate() {
                    self.note_key(map, i, k);
                }
                for (k, p) in ks.iter().zip(prefixes).rev() {
                    v = format!("(store {p} {k} {v})");
                }
                let sym = self.define(map, &t, v);
                self.env.insert(map.clone(), sym);
            }
            IrStmt::Assume(IrExpr::Forall(vars, body)) if self.instantiable(vars, body) => {
                let names: Vec<String> = vars.iter().map(|(n, _)| n.clone()).collect();
                let rendered = self.expr(body, &names)?;
                let mut keys = vec![];
                let mut slots: Vec<(String, Vec<Slot>)> = names.iter().map(|n| (placeholder(n), vec![])).collect();
                let mut err = None;
                body.walk(&mut |x| {
                    if let IrExpr::Select(m, ks) = x {
                        let IrExpr::Var(map) = &**m else { return };
                        for (i, k) in ks.iter().enumerate() {
                            match self.expr(k, &names) {
                                Ok(r) => keys.push(((map.clone(), i), r)),
                                Err(e) => err = Some(e),
                            }
                            if let IrExpr::Var(v) = k {
                                if let Some(j) = names.iter().position(|n| n == v) {
                                    slots[j].1.push((map.clone(), i));
                                }
                            }
                        }
                    }
                });
                if let Some(e) = err {
                    return Err(e);
                }
                self.quants.push(Quant { pc: self.pc.clone(), vars: slots, body: rendered, keys });
            }
            IrStmt::Assume(e) => {
                let c = self.expr(e, &[])?;
                self.assume(c);
            }
            IrStmt::Assert(e, label) => {
                let c = self.expr(e, &[])?;
                let flag = self.declare("viol", &IrType::Bool);
                let _ = writeln!(self.out, "(assert (= {flag} (and {} (not {c}))))", self.pc);
                self.violations.push((flag, label.clone()));
                self.narrow(c);
            }
            IrStmt::Call { proc, rets, .. } if proc == NEW => {
                let r = self.declare("ret", &IrType::Ref);
                self.havocs.push(HavocVar { site: self.site(s), var: "ret".into(), symbol: r.clone(), ty: IrType::Ref });
                let alloc = self.env[ALLOC].clone();
                self.assume(format!("(and (not (= {r} null)) (not (select {alloc} {r})))"));
                let t = IrType::map(IrType::Ref, IrType::Bool);
                self.note_key(ALLOC, 0, &r);
                let a2 = self.define(ALLOC, &t, format!("(store {alloc} {r} true)"));
                self.env.insert(ALLOC.into(), a2);
                if let Some(x) = rets.first() {
                    self.env.insert(x.clone(), r);
                }
            }
            IrStmt::Call { proc, .. } if proc == NEW_UNBOUNDED => {
                let old = self.env[ALLOC].clone();
                let new = self.declare(ALLOC, &IrType::map(IrType::Ref, IrType::Bool));
                let slot = (ALLOC.to_string(), 0);
                self.quants.push(Quant {
                    pc: self.pc.clone(),
                    vars: vec![(placeholder("i"), vec![slot.clone()])],
                    body: format!("(=> (select {old} |?i|) (select {new} |?i|))"),
                    keys: vec![(slot, placeholder("i"))],
                });
                self.env.insert(ALLOC.into(), new);
            }
            IrStmt::Call { proc, .. } => return Err(VerifyError::NotCallFree(proc.clone())),
            IrStmt::Seq(v) => {
                for x in v {
                    self.stmt(x)?;
                }
            }
            IrStmt::If(c, t, e) => {
                let c = self.expr(c, &[])?;
                let c = self.define("cond", &IrType::Bool, c);
                let (env0, pc0) = (self.env.clone(), self.pc.clone());
                self.narrow(c.clone());
                self.stmt(t)?;
                let (env_t, pc_t) = (std::mem::replace(&mut self.env, env0), std::mem::replace(&mut self.pc, pc0));
                self.narrow(format!("(not {c})"));
                self.stmt(e)?;
                let mut changed: Vec<&String> = env_t.keys().filter(|k| env_t.get(*k) != self.env.get(*k)).collect();
                changed.sort();
                for x in changed {
                    let t = self.ty(x)?;
                    let (a, b) = (env_t[x].clone(), self.env[x].clone());
                    let m = self.define(x, &t, format!("(ite {c} {a} {b})"));
                    self.env.insert(x.clone(), m);
                }
                let pc = format!("(or {pc_t} {})", self.pc);
                self.pc = self.define("pc", &IrType::Bool, pc);
            }
            IrStmt::While(..) => return Err(VerifyError::NotLoopFree(String::new())),
        }
        Ok(())
    }
}

/// Rounds of quantifier instantiation; each round may use keys produced
/// by the previous one.
const INSTANTIATION_ROUNDS: usize = 3;

fn product(choices: &[Vec<String>]) -> Vec<Vec<String>> {
    choices.iter().fold(vec![vec![]], |acc, c| {
        acc.iter().flat_map(|prefix| c.iter().map(move |x| [prefix.clone(), vec![x.clone()]].concat())).collect()
    })
}

fn collect_selects<'e>(e: &'e IrExpr, names: &BTreeSet<&str>, out: &mut Vec<(&'e IrExpr, BTreeSet<String>)>) {
    if let IrExpr::Select(..) = e {
        let mut fv = BTreeSet::new();
        e.walk(&mut |x| {
            if let IrExpr::Var(n) = x {
                if names.contains(n.as_str()) {
                    fv.insert(n.clone());
                }
            }
        });
        if !fv.is_empty() {
            out.push((e, fv));
            return;
        }
    }
    match e {
        IrExpr::Unary(_, a) => collect_selects(a, names, out),
        IrExpr::Binary(_, a, b) => {
            collect_selects(a, names, out);
            collect_selects(b, names, out);
        }
        IrExpr::UF(_, args) => args.iter().for_each(|a| collect_selects(a, names, out)),
        _ => {}
    }
}

/// Encodes `proc` (loop-free; calls only to the allocation intrinsics).
/// Globals and parameters start unconstrained; scalar locals start at
/// zero, matching the IR interpreter.
pub fn vc_gen(prog: &IrProgram, proc: &IrProcedure, sites: &Sites) -> Result<Vc, VerifyError> {
    let mut types: HashMap<String, IrType> = prog.globals.iter().cloned().collect();
    for (n, t) in proc.params.iter().chain(&proc.returns).chain(&proc.locals) {
        types.insert(n.clone(), t.clone());
    }
    let mut e = Enc {
        prog,
        types,
        sites,
        out: String::new(),
        n: 0,
        env: HashMap::new(),
        pc: "true".into(),
        violations: vec![],
        havocs: vec![],
        symbols: HashMap::new(),
        pool: RefCell::new(BTreeMap::new()),
        quants: vec![],
    };
    e.out.push_str("(set-logic ALL)\n(declare-sort Ref 0)\n(declare-fun null () Ref)\n");
    for u in &prog.ufs {
        let args: Vec<String> = u.args.iter().map(sort).collect();
        let _ = writeln!(e.out, "(declare-fun {} ({}) {})", u.name, args.join(" "), sort(&u.ret));
    }
    for a in &prog.axioms {
        let s = e.expr(a, &[])?;
        let _ = writeln!(e.out, "(assert {s})");
    }
    for (g, t) in &prog.globals {
        let s = e.declare(g, t);
        e.env.insert(g.clone(), s);
    }
    for (p, t) in &proc.params {
        let s = e.declare(p, t);
        e.env.insert(p.clone(), s);
    }
    for (x, t) in proc.returns.iter().chain(&proc.locals) {
        let s = match t {
            IrType::Int => "0".to_string(),
            IrType::Bool => "false".to_string(),
            IrType::Ref => "null".to_string(),
            IrType::Map(..) => e.declare(x, t),
        };
        e.env.insert(x.clone(), s);
    }
    e.stmt(&proc.body)?;
    e.instantiate();
    Ok(Vc { body: e.out, violations: e.violations, havocs: e.havocs, symbols: e.symbols })
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::*;
    use crate::verify::smt::{check_smt, SmtResult, SolverConfig};
    use crate::vir::parse_program;
    use crate::vir::interp::havoc_sites;

    fn run(src: &str, proc: &str) -> (Vc, SmtResult) {
        let p = parse_program(src).unwrap();
        let sites = havoc_sites(&p);
        let vc = vc_gen(&p, p.procedure(proc).unwrap(), &sites).unwrap();
        let r = check_smt(&SolverConfig::default(), &vc.query(proc, None), Duration::from_secs(20)).unwrap();
        (vc, r)
    }

    #[test]
    fn assert_false_is_sat_and_blocked_path_is_unsat() {
        assert!(matches!(run("procedure P() { assert {:msg \"a\"} false; }", "P").1, SmtResult::Sat(_)));
        assert_eq!(run("procedure P() { assume false; assert {:msg \"a\"} false; }", "P").1, SmtResult::Unsat);
    }

    #[test]
    fn model_names_the_failing_branch() {
        let src = "procedure P() { var x: int; havoc x; if (x > 3) { assert {:msg \"big\"} x < 5; } else { assert {:msg \"small\"} x > -10; } }";
        let (vc, r) = run(src, "P");
        let SmtResult::Sat(m) = r else { panic!("{r:?}") };
        let v = vc.violated(&m);
        assert_eq!(v.len(), 1);
        let x = &m[vc.havocs[0].symbol.trim_matches('|')];
        match (v[0].as_str(), x) {
            ("big", ModelValue::Int(i)) => assert!(*i >= 5.into()),
            ("small", ModelValue::Int(i)) => assert!(*i <= (-10).into()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn division_by_zero_is_zero() {
        let src = "procedure P() { var x: int; havoc x; assert {:msg \"d\"} x div 0 == 0 && x mod 0 == 0 && 7 div -2 == -3 && -7 mod 2 == 1; }";
        assert_eq!(run(src, "P").1, SmtResult::Unsat);
    }

    #[test]
    fn nested_map_init_keeps_inner_maps_apart() {
        let src = "
var Alloc: [Ref]bool;
var Length: [Ref]int;
var M_int_Ref: [Ref][int]Ref;
var M_int_int: [Ref][int]int;
procedure New() returns (ret: Ref) { havoc ret; assume ret != null; assume !Alloc[ret]; Alloc[ret] := true; }
procedure NewUnbounded() { }
procedure P()
{
  var v: Ref;
  var a: int;
  var b: int;
  call v := New();
  assume (forall i1: int :: Length[M_int_Ref[v][i1]] == 0);
  assume (forall i1: int :: !Alloc[M_int_Ref[v][i1]]);
  call NewUnbounded();
  assume (forall i1: int :: Alloc[M_int_Ref[v][i1]]);
  assume (forall i1: int, j1: int :: i1 == j1 || M_int_Ref[v][i1] != M_int_Ref[v][j1]);
  assume (forall i1: int, i2: int :: M_int_int[M_int_Ref[v][i1]][i2] == 0);
  havoc a;
  havoc b;
  assume a != b;
  M_int_int[M_int_Ref[v][a]][0] := 5;
  assert {:msg \"apart\"} M_int_int[M_int_Ref[v][b]][0] == 0;
  assert {:msg \"fresh\"} M_int_Ref[v][a] != v;
}";
        let (vc, r) = run(src, "P");
        assert_eq!(r, SmtResult::Unsat);
        assert!(!vc.body.contains("forall"), "{}", vc.body);
        // Dropping distinctness makes aliasing possible: inner refs agree.
        let weak = src.replace("assume (forall i1: int, j1: int :: i1 == j1 || M_int_Ref[v][i1] != M_int_Ref[v][j1]);", "");
        let (vc, r) = run(&weak, "P");
        let SmtResult::Sat(m) = r else { panic!("{r:?}") };
        assert_eq!(vc.violated(&m), vec!["apart"]);
    }

    #[test]
    fn non_key_quantifier_is_left_to_the_solver() {
        let src = "var f: [int]int; procedure P() { var x: int; assume (forall i: int :: i + 0 == i); havoc x; assert {:msg \"a\"} x == x; }";
        let (vc, r) = run(src, "P");
        assert!(vc.body.contains("forall"));
        assert_eq!(r, SmtResult::Unsat);
    }

    #[test]
    fn rejects_loops_and_calls() {
        let p = parse_program("procedure Q() { } procedure P() { call Q(); }").unwrap();
        assert!(matches!(vc_gen(&p, p.procedure("P").unwrap(), &Sites::new()), Err(VerifyError::NotCallFree(_))));
        let p = parse_program("procedure P() { while (true) { } }").unwrap();
        assert!(matches!(vc_gen(&p, p.procedure("P").unwrap(), &Sites::new()), Err(VerifyError::NotLoopFree(_))));
    }
}
