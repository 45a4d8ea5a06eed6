//! Verification of translated programs.
//!
//! Three phases: Houdini inference of a conjunctive contract invariant
//! from a predicate template; if that does not prove every assertion,
//! bounded model checking of the harness for `k = 1..k_max` transactions;
//! otherwise the program is reported safe up to `k_max`.

pub mod bmc;
pub mod houdini;
pub mod inline;
pub mod sexp;
pub mod smt;
pub mod vcgen;

use std::fmt;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use serde::Serialize;
use thiserror::Error;

use crate::policy::{ParamType, Policy};
use crate::sol::conformance::STATE_VAR;
use crate::sol::{SolType, TypedProgram};
use crate::translate::{state_map, Translation, HARNESS, THIS};
use crate::vir::{IrExpr, IrProcedure, IrStmt};

pub use bmc::{bmc, CounterexampleTrace, TraceValue, Transaction};
pub use houdini::{houdini, is_inductive, HoudiniResult};
pub use smt::{check_smt, SmtQuery, SmtResult, SolverConfig};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("cannot start solver {0}")]
    SolverUnavailable(String),
    #[error("solver failed: {0}")]
    SolverCrashed(String),
    #[error("call inlining exceeded depth {0}")]
    RecursionDepthExceeded(usize),
    #[error("unknown procedure `{0}`")]
    UnknownProcedure(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("procedure still calls `{0}` after inlining")]
    NotCallFree(String),
    #[error("procedure still contains a loop{0}")]
    NotLoopFree(String),
    #[error("counterexample does not replay: {0}")]
    ReplayMismatch(String),
    #[error("cannot write query dump: {0}")]
    Dump(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub k_max: usize,
    /// Unrolling depth for loops inside functions during bounded checking.
    pub loop_unroll: usize,
    pub inline_depth: usize,
    pub timeout: Duration,
    pub solver: SolverConfig,
    pub dump_smt: Option<PathBuf>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            k_max: 6,
            loop_unroll: 8,
            inline_depth: 32,
            timeout: Duration::from_secs(60),
            solver: SolverConfig::default(),
            dump_smt: None,
        }
    }
}

impl VerifyConfig {
    pub(crate) fn dump(&self, q: &SmtQuery) -> Result<(), VerifyError> {
        if let Some(dir) = &self.dump_smt {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{}.smt2", q.name)), &q.script)?;
        }
        Ok(())
    }

    pub(crate) fn check(&self, q: &SmtQuery) -> Result<SmtResult, VerifyError> {
        self.dump(q)?;
        check_smt(&self.solver, q, self.timeout)
    }
}

/// One side of a template predicate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Operand {
    /// A state variable of the root instance, with its declaring contract.
    State { var: String, contract: String },
    Null,
    /// An enum member and its integer code.
    Member { name: String, value: i64 },
}

impl Operand {
    fn expr(&self) -> IrExpr {
        match self {
            Operand::State { var, contract } => IrExpr::select(IrExpr::var(&state_map(var, contract)), vec![IrExpr::var(THIS)]),
            Operand::Null => IrExpr::Null,
            Operand::Member { value, .. } => IrExpr::Int(BigInt::from(*value)),
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::State { var, .. } => write!(f, "{var}"),
            Operand::Null => write!(f, "0x0"),
            Operand::Member { name, .. } => write!(f, "{name}"),
        }
    }
}

/// `lhs == rhs` or `lhs != rhs` over the root instance's state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CandidatePredicate {
    pub lhs: Operand,
    pub rhs: Operand,
    pub equal: bool,
}

impl CandidatePredicate {
    pub fn expr(&self) -> IrExpr {
        if self.equal {
            IrExpr::eq(self.lhs.expr(), self.rhs.expr())
        } else {
            IrExpr::ne(self.lhs.expr(), self.rhs.expr())
        }
    }
}

impl fmt::Display for CandidatePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, if self.equal { "==" } else { "!=" }, self.rhs)
    }
}

fn both(lhs: Operand, rhs: Operand, out: &mut Vec<CandidatePredicate>) {
    for equal in [true, false] {
        let c = CandidatePredicate { lhs: lhs.clone(), rhs: rhs.clone(), equal };
        if !out.contains(&c) {
            out.push(c);
        }
    }
}

/// Instantiates `e1 == e2` and `e1 != e2` over role variables, the null
/// address and state constants.
///
/// With a policy, the roles are the workflow's instance-role properties
/// and the states are the workflow's states of the `State` variable.
/// Without one, every address- or contract-typed state variable of the
/// root acts as a role and every enum-typed one as a state variable.
pub fn generate_candidates(tp: &TypedProgram, root: &str, policy: Option<&Policy>) -> Vec<CandidatePredicate> {
    let state = |v: &str| {
        tp.resolve_state_var(root, v).map(|(c, sv)| (Operand::State { var: sv.name.clone(), contract: c.name.clone() }, sv.clone()))
    };
    let mut roles: Vec<Operand> = vec![];
    let mut states: Vec<(Operand, Vec<(String, i64)>)> = vec![];
    match policy {
        Some(p) => {
            let w = p.workflows.iter().find(|w| w.name == root).or(p.workflows.first());
            if let Some(w) = w {
                for prop in &w.properties {
                    if matches!(prop.ty, ParamType::Role(_)) {
                        if let Some((o, _)) = state(&prop.name) {
                            roles.push(o);
                        }
                    }
                }
                if let Some((o, sv)) = state(STATE_VAR) {
                    if let Some(en) = &sv.enum_name {
                        let members =
                            w.states.iter().filter_map(|s| tp.enum_value(en, s).map(|v| (format!("{en}.{s}"), v as i64))).collect();
                        states.push((o, members));
                    }
                }
            }
        }
        None => {
            for (c, sv) in tp.all_state_vars(root) {
                let o = Operand::State { var: sv.name.clone(), contract: c.name.clone() };
                if let Some(en) = &sv.enum_name {
                    let members = tp
                        .enum_def(en)
                        .map(|d| d.members.iter().enumerate().map(|(i, m)| (format!("{en}.{m}"), i as i64)).collect())
                        .unwrap_or_default();
                    states.push((o, members));
                } else if matches!(sv.ty, SolType::Address | SolType::Contract(_)) {
                    roles.push(o);
                }
            }
        }
    }
    let mut out = vec![];
    for (i, x) in roles.iter().enumerate() {
        for y in &roles[i + 1..] {
            both(x.clone(), y.clone(), &mut out);
        }
    }
    for x in &roles {
        both(x.clone(), Operand::Null, &mut out);
    }
    for (o, members) in states {
        for (name, value) in members {
            both(o.clone(), Operand::Member { name, value }, &mut out);
        }
    }
    out
}

/// The harness split into its deployment prefix and its per-transaction
/// round.
pub(crate) struct Harness<'a> {
    pub main: &'a IrProcedure,
    pub init: Vec<IrStmt>,
    pub round: Option<IrStmt>,
}

impl<'a> Harness<'a> {
    pub fn of(t: &'a Translation) -> Harness<'a> {
        let main = t.program.procedure(HARNESS).expect("translation has a harness");
        let mut init = vec![];
        let mut round = None;
        for s in main.body.items() {
            match s {
                IrStmt::While(IrExpr::Bool(true), b) => round = Some((**b).clone()).filter(|b| *b != IrStmt::Skip),
                s => init.push(s.clone()),
            }
        }
        Harness { main, init, round }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    FullyVerified { invariant: Vec<CandidatePredicate> },
    Refuted { k: usize, trace: CounterexampleTrace },
    PartiallyVerified { bound: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings {
    pub houdini_ms: u128,
    pub bmc_ms: u128,
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub verdict: Verdict,
    pub houdini: HoudiniResult,
    pub timings: Timings,
}

/// Runs the three phases on a translated program.
pub fn verify(
    tp: &TypedProgram,
    t: &Translation,
    candidates: &[CandidatePredicate],
    cfg: &VerifyConfig,
) -> Result<VerifyOutcome, VerifyError> {
    let start = Instant::now();
    let h = houdini(t, candidates, cfg)?;
    let mut timings = Timings { houdini_ms: start.elapsed().as_millis(), bmc_ms: 0 };
    tracing::info!(retained = h.invariant.len(), verified = h.asserts_verified, "houdini finished");
    if h.asserts_verified {
        let verdict = Verdict::FullyVerified { invariant: h.invariant.clone() };
        return Ok(VerifyOutcome { verdict, houdini: h, timings });
    }
    let start = Instant::now();
    let mut bound = 0;
    for k in 1..=cfg.k_max {
        match bmc(tp, t, k, cfg)? {
            bmc::BmcResult::Counterexample(trace) => {
                timings.bmc_ms = start.elapsed().as_millis();
                return Ok(VerifyOutcome { verdict: Verdict::Refuted { k, trace }, houdini: h, timings });
            }
            bmc::BmcResult::Safe => bound = k,
            bmc::BmcResult::Unknown => break,
        }
    }
    timings.bmc_ms = start.elapsed().as_millis();
    Ok(VerifyOutcome { verdict: Verdict::PartiallyVerified { bound }, houdini: h, timings })
}
