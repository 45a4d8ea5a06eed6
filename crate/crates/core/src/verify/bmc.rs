//! Bounded model checking of the harness and counterexample replay.
//!
//! A satisfying model fixes every nondeterministic choice of the unrolled
//! harness. Those choices are replayed in the IR interpreter, which must
//! fail the same assertion; the transactions read off that run are then
//! replayed against the source semantics, which must fail it too.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Serialize, Serializer};

use crate::sol::interp::{Interp, Stop, Value};
use crate::sol::{desugar_modifiers, SolType, TypedProgram};
use crate::translate::{assert_label, Translation, CHOICE, HARNESS, SENDER};
use crate::vir::interp::{havoc_sites, IrInterp, NondetSource, Outcome, Val};
use crate::vir::prelude::{NEW, NEW_UNBOUNDED};
use crate::vir::{IrProgram, IrType};

use super::inline::{inline_procedure, unroll_harness, LoopMode};
use super::smt::{Model, ModelValue, SmtResult};
use super::vcgen::{vc_gen, Vc};
use super::{VerifyConfig, VerifyError};

/// First address handed to callers that are not contract instances.
pub const EXTERNAL_BASE: u64 = 0x1000;
const INVENTED_REFS: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TraceValue {
    Int(BigInt),
    Bool(bool),
    Str(String),
    Addr(u64),
}

impl fmt::Display for TraceValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceValue::Int(i) => write!(f, "{i}"),
            TraceValue::Bool(b) => write!(f, "{b}"),
            TraceValue::Str(s) => write!(f, "{s:?}"),
            TraceValue::Addr(a) => write!(f, "0x{a:x}"),
        }
    }
}

impl Serialize for TraceValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TraceValue::Int(i) => match i.to_i64() {
                Some(v) => s.serialize_i64(v),
                None => s.serialize_str(&i.to_string()),
            },
            TraceValue::Bool(b) => s.serialize_bool(*b),
            TraceValue::Str(x) => s.serialize_str(x),
            TraceValue::Addr(_) => s.serialize_str(&self.to_string()),
        }
    }
}

impl TraceValue {
    fn to_value(&self) -> Value {
        match self {
            TraceValue::Int(i) => Value::Int(i.clone()),
            TraceValue::Bool(b) => Value::Bool(*b),
            TraceValue::Str(s) => Value::Str(s.clone()),
            TraceValue::Addr(a) => Value::Addr(*a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transaction {
    /// `constructor` for the deployment.
    pub function: String,
    pub sender: TraceValue,
    pub args: Vec<(String, TraceValue)>,
    /// Values of `nondet()` in evaluation order.
    pub nondet: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleTrace {
    /// The deployment first, then one entry per function call.
    pub transactions: Vec<Transaction>,
    /// `line:col` of the failing assertion.
    pub label: String,
}

impl fmt::Display for Transaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(|(n, v)| format!("{n}={v}")).collect();
        write!(f, "{}({}) sender={}", self.function, args.join(", "), self.sender)?;
        if !self.nondet.is_empty() {
            let bits: String = self.nondet.iter().map(|b| if *b { '1' } else { '0' }).collect();
            write!(f, " nondet={bits}")?;
        }
        Ok(())
    }
}

impl fmt::Display for CounterexampleTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let txs: Vec<String> = self.transactions.iter().map(|t| t.to_string()).collect();
        write!(f, "[{}] fails {}", txs.join("; "), self.label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BmcResult {
    Counterexample(CounterexampleTrace),
    Safe,
    Unknown,
}

/// The harness unrolled `k` times with every call inlined, packaged with
/// the allocation intrinsics.
pub fn unrolled_program(t: &Translation, k: usize, cfg: &VerifyConfig) -> Result<IrProgram, VerifyError> {
    let main = t.program.procedure(HARNESS).expect("translation has a harness");
    let main = inline_procedure(&t.program, &unroll_harness(main, k), LoopMode::Unroll(cfg.loop_unroll), cfg.inline_depth)?;
    let mut procedures: Vec<_> = [NEW, NEW_UNBOUNDED].iter().filter_map(|n| t.program.procedure(n).cloned()).collect();
    procedures.push(main);
    Ok(IrProgram {
        globals: t.program.globals.clone(),
        ufs: t.program.ufs.clone(),
        consts: t.program.consts.clone(),
        axioms: t.program.axioms.clone(),
        procedures,
    })
}

/// Searches for an assertion failure within `k` transactions after
/// deployment.
pub fn bmc(tp: &TypedProgram, t: &Translation, k: usize, cfg: &VerifyConfig) -> Result<BmcResult, VerifyError> {
    let prog = unrolled_program(t, k, cfg)?;
    let sites = havoc_sites(&prog);
    let main = prog.procedure(HARNESS).expect("present");
    let vc = vc_gen(&prog, main, &sites)?;
    Ok(match cfg.check(&vc.query(&format!("{HARNESS}_bmc_{k}"), None))? {
        SmtResult::Unsat => BmcResult::Safe,
        SmtResult::Unknown => BmcResult::Unknown,
        SmtResult::Sat(m) => BmcResult::Counterexample(extract_trace(tp, t, &prog, &vc, &m)?),
    })
}

fn ref_ids(m: &Model) -> impl Fn(&str) -> u64 + '_ {
    let null = match m.get("null") {
        Some(ModelValue::Elem(e)) => Some(e.clone()),
        _ => None,
    };
    move |e: &str| {
        if Some(e) == null.as_deref() {
            return 0;
        }
        e.rsplit("!val!").next().and_then(|n| n.parse::<u64>().ok()).map_or(u64::MAX, |n| n + 1)
    }
}

/// Replays the model and reads the transaction sequence off the run.
pub fn extract_trace(tp: &TypedProgram, t: &Translation, prog: &IrProgram, vc: &Vc, m: &Model) -> Result<CounterexampleTrace, VerifyError> {
    let id = ref_ids(m);
    let mut keyed = HashMap::new();
    for h in &vc.havocs {
        let Some(v) = m.get(h.symbol.trim_matches('|')) else { continue };
        let val = match (v, &h.ty) {
            (ModelValue::Int(i), IrType::Int) => Val::Int(i.clone()),
            (ModelValue::Bool(b), IrType::Bool) => Val::Bool(*b),
            (ModelValue::Elem(e), IrType::Ref) => Val::Ref(id(e)),
            _ => continue,
        };
        keyed.insert(h.site, val);
    }
    let mut ir = IrInterp::new(prog, NondetSource::Keyed(keyed)).with_ref_base(INVENTED_REFS);
    let label = match ir.run(HARNESS, vec![]) {
        Ok(Outcome::AssertFailed(l)) => l,
        other => return Err(VerifyError::ReplayMismatch(format!("the IR interpreter ended with {other:?}"))),
    };
    if !vc.violated(m).contains(&label) {
        return Err(VerifyError::ReplayMismatch(format!("the IR interpreter failed {label}, the model another assertion")));
    }

    // Contract instances and external callers get distinct small addresses.
    let this_ref = ir.havocs.iter().find(|e| e.var == "ret").and_then(|e| e.value.as_ref_id()).unwrap_or(0);
    let mut addrs: BTreeMap<u64, u64> = BTreeMap::from([(0, 0), (this_ref, 1)]);
    let mut addr = |r: u64| {
        let n = addrs.len() as u64 - 1;
        *addrs.entry(r).or_insert(EXTERNAL_BASE + n)
    };
    let mut convert = |v: &Val, ty: &SolType| -> TraceValue {
        match (v, ty) {
            (Val::Bool(b), _) => TraceValue::Bool(*b),
            (Val::Int(i), SolType::String) => TraceValue::Str(
                i.to_usize().and_then(|n| t.strings.get(n).cloned()).unwrap_or_else(|| format!("<string {i}>")),
            ),
            (Val::Int(i), _) => TraceValue::Int(i.clone()),
            (Val::Ref(r), _) => TraceValue::Addr(addr(*r)),
            (Val::Map(_), _) => TraceValue::Int(0.into()),
        }
    };

    let mut ctor = Transaction { function: "constructor".into(), sender: TraceValue::Addr(0), args: vec![], nondet: vec![] };
    let mut calls: Vec<Transaction> = vec![];
    let mut deployed = false;
    for ev in &ir.havocs {
        let v = ev.var.as_str();
        if let Some((n, ty)) = t.ctor_args.iter().find(|(n, _)| n == v) {
            ctor.args.push((n.trim_start_matches("ctor_").to_string(), convert(&ev.value, ty)));
        } else if v == SENDER {
            let s = convert(&ev.value, &SolType::Address);
            if deployed {
                calls.push(Transaction { function: String::new(), sender: s, args: vec![], nondet: vec![] });
            } else {
                ctor.sender = s;
                deployed = true;
            }
        } else if v == CHOICE {
            let tx = calls.last_mut().expect("a sender precedes every choice");
            let c = match &ev.value {
                Val::Int(i) => i.to_usize().unwrap_or(0),
                _ => 0,
            };
            if let Some(e) = t.entries.iter().find(|e| e.choice == c) {
                tx.function = e.function.clone();
            }
        } else if let Some(e) = t.entries.iter().find(|e| e.args.iter().any(|(n, _)| n == v)) {
            let (n, ty) = e.args.iter().find(|(n, _)| n == v).expect("found");
            let tx = calls.last_mut().expect("a sender precedes every argument");
            tx.args.push((n.trim_start_matches(&format!("arg_{}_", e.function)).to_string(), convert(&ev.value, ty)));
        } else if v.starts_with("__nd") {
            let b = matches!(ev.value, Val::Bool(true));
            calls.last_mut().unwrap_or(&mut ctor).nondet.push(b);
        }
    }
    let mut transactions = vec![ctor];
    transactions.extend(calls);
    let trace = CounterexampleTrace { transactions, label };
    replay_source(tp, &t.root, &trace)?;
    Ok(trace)
}

/// Replays `trace` against the source semantics (after inlining
/// modifiers); the last transaction
/// must fail the recorded assertion and every earlier one must succeed.
pub fn replay_source(tp: &TypedProgram, root: &str, trace: &CounterexampleTrace) -> Result<(), VerifyError> {
    let tape: Vec<bool> = trace.transactions.iter().flat_map(|t| t.nondet.iter().copied()).collect();
    let tp = &desugar_modifiers(tp).map_err(|e| VerifyError::ReplayMismatch(e.to_string()))?;
    let mut sol = Interp::new(tp).with_tape(tape);
    let last = trace.transactions.len() - 1;
    let mut addr = 0;
    for (i, tx) in trace.transactions.iter().enumerate() {
        let sender = tx.sender.to_value();
        let args = tx.args.iter().map(|(_, v)| v.to_value()).collect();
        let r = if i == 0 { sol.deploy(root, sender, args).map(|a| addr = a) } else { sol.call(addr, &tx.function, sender, args).map(|_| ()) };
        match (r, i == last) {
            (Ok(()), false) => {}
            (Err(Stop::AssertFailed(s)), true) if assert_label(s) == trace.label => return Ok(()),
            (r, _) => {
                return Err(VerifyError::ReplayMismatch(format!(
                    "transaction {} ({}) ended with {r:?} in the source semantics, expected {}; trace: {}",
                    i + 1,
                    tx.function,
                    if i == last { format!("assertion failure at {}", trace.label) } else { "success".into() },
                    trace
                )))
            }
        }
    }
    Err(VerifyError::ReplayMismatch("empty trace".into()))
}
