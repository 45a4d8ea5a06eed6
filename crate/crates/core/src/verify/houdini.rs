//! Houdini: the greatest inductive subset of a candidate pool.
//!
//! The constructor must establish each retained candidate from an
//! arbitrary pre-state, and each public function must preserve the
//! conjunction of retained candidates. Both are checked modularly, one
//! query per procedure, with loops inside function bodies cut (their
//! targets havoc'd). Program assertions are assumed while candidates are
//! inferred and checked afterwards under the final invariant.

use rayon::prelude::*;
use serde::Serialize;

use crate::translate::{Translation, CHOICE, THIS};
use crate::vir::prelude::{ALLOC, DTYPE};
use crate::vir::{IrExpr, IrProcedure, IrStmt};

use super::inline::{inline_procedure, LoopMode};
use super::smt::SmtResult;
use super::vcgen::{vc_gen, Sites, Vc};
use super::{CandidatePredicate, Harness, VerifyConfig, VerifyError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoudiniResult {
    pub invariant: Vec<CandidatePredicate>,
    /// Every assertion holds under the invariant.
    pub asserts_verified: bool,
    pub rounds: usize,
}

const CAND: &str = "cand:";

fn label(i: usize) -> String {
    format!("{CAND}{i}")
}

/// A procedure to check: the constructor or one public function.
struct Target {
    name: String,
    /// Harness choice selecting the function; `None` for the constructor.
    choice: Option<usize>,
}

fn targets(t: &Translation) -> Vec<Target> {
    let mut out = vec![Target { name: crate::translate::proc_name("Ctor", &t.root), choice: None }];
    out.extend(t.entries.iter().map(|e| Target { name: e.procedure.clone(), choice: Some(e.choice) }));
    out
}

fn assumes_for_asserts(s: &IrStmt) -> IrStmt {
    match s {
        IrStmt::Assert(e, _) => IrStmt::Assume(e.clone()),
        IrStmt::Seq(v) => IrStmt::Seq(v.iter().map(assumes_for_asserts).collect()),
        IrStmt::If(c, a, b) => IrStmt::If(c.clone(), Box::new(assumes_for_asserts(a)), Box::new(assumes_for_asserts(b))),
        s => s.clone(),
    }
}

/// The check for `target` with `assumed` at entry (functions only) and,
/// when `asserted` is given, those candidates asserted at exit instead of
/// the program's own assertions.
fn build(
    t: &Translation,
    h: &Harness,
    target: &Target,
    cands: &[CandidatePredicate],
    assumed: &[usize],
    asserted: Option<&[usize]>,
    cfg: &VerifyConfig,
) -> Result<Vc, VerifyError> {
    let this = IrExpr::var(THIS);
    let mut body = vec![];
    match target.choice {
        None => body.extend(h.init.iter().cloned()),
        Some(k) => {
            body.push(IrStmt::Havoc(THIS.into()));
            body.push(IrStmt::Assume(IrExpr::ne(this.clone(), IrExpr::Null)));
            body.push(IrStmt::Assume(IrExpr::select(IrExpr::var(ALLOC), vec![this.clone()])));
            body.push(IrStmt::Assume(IrExpr::eq(IrExpr::select(IrExpr::var(DTYPE), vec![this]), IrExpr::var(&t.root))));
            body.extend(assumed.iter().map(|&i| IrStmt::Assume(cands[i].expr())));
            for s in h.round.as_ref().map(|r| r.items()).unwrap_or_default() {
                body.push(s.clone());
                if *s == IrStmt::Havoc(CHOICE.into()) {
                    body.push(IrStmt::Assume(IrExpr::eq(IrExpr::var(CHOICE), IrExpr::int(k as i64))));
                }
            }
        }
    }
    let wrapper = IrProcedure { name: target.name.clone(), body: IrStmt::seq(body), ..h.main.clone() };
    let mut p = inline_procedure(&t.program, &wrapper, LoopMode::Cut, cfg.inline_depth)?;
    if let Some(asserted) = asserted {
        let mut items = vec![assumes_for_asserts(&p.body)];
        items.extend(asserted.iter().map(|&i| IrStmt::Assert(cands[i].expr(), label(i))));
        p.body = IrStmt::seq(items);
    }
    vc_gen(&t.program, &p, &Sites::new())
}

enum Check {
    Refuted(Vec<usize>),
    Unknown,
}

fn candidates_refuted(vc: &Vc, name: &str, cfg: &VerifyConfig) -> Result<Option<Check>, VerifyError> {
    Ok(match cfg.check(&vc.query(name, None))? {
        SmtResult::Unsat => None,
        SmtResult::Sat(m) => {
            let v = vc.violated(&m).iter().filter_map(|l| l.strip_prefix(CAND)?.parse().ok()).collect();
            Some(Check::Refuted(v))
        }
        SmtResult::Unknown => Some(Check::Unknown),
    })
}

/// One Houdini round over every target; returns the refuted candidates.
fn round(
    t: &Translation,
    h: &Harness,
    cands: &[CandidatePredicate],
    alive: &[usize],
    n: usize,
    cfg: &VerifyConfig,
) -> Result<Vec<usize>, VerifyError> {
    let ts = targets(t);
    let results: Vec<Result<Vec<usize>, VerifyError>> = ts
        .par_iter()
        .map(|target| {
            let vc = build(t, h, target, cands, alive, Some(alive), cfg)?;
            let name = format!("{}_houdini_{n}", target.name);
            match candidates_refuted(&vc, &name, cfg)? {
                None => Ok(vec![]),
                Some(Check::Refuted(v)) => Ok(v),
                // Unknown: retry each candidate alone; unknown counts as refuted.
                Some(Check::Unknown) => {
                    let mut out = vec![];
                    for &i in alive {
                        let l = label(i);
                        let q = vc.query(&format!("{name}_{i}"), Some(&|x: &str| x == l));
                        if !matches!(cfg.check(&q)?, SmtResult::Unsat) {
                            out.push(i);
                        }
                    }
                    Ok(out)
                }
            }
        })
        .collect();
    let mut removed = vec![];
    for r in results {
        removed.extend(r?);
    }
    removed.sort();
    removed.dedup();
    Ok(removed)
}

/// Whether the conjunction of `set` is established by the constructor and
/// preserved by every public function.
pub fn is_inductive(t: &Translation, cands: &[CandidatePredicate], set: &[usize], cfg: &VerifyConfig) -> Result<bool, VerifyError> {
    let h = Harness::of(t);
    if set.is_empty() {
        return Ok(true);
    }
    Ok(round(t, &h, cands, set, 0, cfg)?.is_empty())
}

/// Whether every program assertion holds, assuming `set` before each
/// public function.
pub fn asserts_hold(t: &Translation, cands: &[CandidatePredicate], set: &[usize], cfg: &VerifyConfig) -> Result<bool, VerifyError> {
    let h = Harness::of(t);
    let results: Vec<Result<bool, VerifyError>> = targets(t)
        .par_iter()
        .map(|target| {
            let vc = build(t, &h, target, cands, set, None, cfg)?;
            Ok(matches!(cfg.check(&vc.query(&format!("{}_asserts_0", target.name), None))?, SmtResult::Unsat))
        })
        .collect();
    let mut ok = true;
    for r in results {
        ok &= r?;
    }
    Ok(ok)
}

/// Iteratively drops refuted candidates until the rest is inductive.
pub fn houdini(t: &Translation, cands: &[CandidatePredicate], cfg: &VerifyConfig) -> Result<HoudiniResult, VerifyError> {
    let h = Harness::of(t);
    let mut alive: Vec<usize> = (0..cands.len()).collect();
    let mut rounds = 0;
    while !alive.is_empty() {
        rounds += 1;
        let removed = round(t, &h, cands, &alive, rounds, cfg)?;
        tracing::debug!(round = rounds, removed = removed.len(), "houdini round");
        if removed.is_empty() {
            break;
        }
        alive.retain(|i| !removed.contains(i));
    }
    let asserts_verified = asserts_hold(t, cands, &alive, cfg)?;
    Ok(HoudiniResult { invariant: alive.iter().map(|&i| cands[i].clone()).collect(), asserts_verified, rounds })
}
