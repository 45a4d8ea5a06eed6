//! End-to-end driver: reads a policy and contract sources, runs the
//! pipeline and produces a text report plus an optional JSON report.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use solconform::instrument::{instrument_for_conformance, make_runtime_checks, Instrumented};
use solconform::policy::{parse_policy, validate_policy, Policy};
use solconform::sol::{check_syntactic_conformance, parse_contract, print_program, typecheck, TypedProgram};
use solconform::translate::{parse_label, translate_program};
use solconform::verify::{generate_candidates, verify, CounterexampleTrace, SolverConfig, Verdict, VerifyConfig};

/// Version of the JSON report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Check the contract against a workflow policy.
    Conformance,
    /// Check the contract's own `assert` statements.
    Assertions,
    /// Instrument and emit, without verifying.
    InstrumentOnly,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub sources: Vec<PathBuf>,
    pub policy: Option<PathBuf>,
    pub root: String,
    pub k_max: usize,
    /// Unrolling depth of loops inside functions during bounded checking.
    pub harness_bound: usize,
    pub solver: Option<PathBuf>,
    pub timeout: Duration,
    pub emit_instrumented: Option<PathBuf>,
    /// Emit the runtime-checking variant instead of the verification one.
    pub runtime_checks: bool,
    pub emit_ir: Option<PathBuf>,
    pub dump_smt: Option<PathBuf>,
    pub report_json: Option<PathBuf>,
    pub report_timings: bool,
}

impl RunConfig {
    pub fn new(mode: Mode, sources: Vec<PathBuf>, root: &str) -> RunConfig {
        let d = VerifyConfig::default();
        RunConfig {
            mode,
            sources,
            policy: None,
            root: root.to_string(),
            k_max: d.k_max,
            harness_bound: d.loop_unroll,
            solver: None,
            timeout: d.timeout,
            emit_instrumented: None,
            runtime_checks: false,
            emit_ir: None,
            dump_smt: None,
            report_json: None,
            report_timings: false,
        }
    }

    fn verify_config(&self) -> VerifyConfig {
        let solver = SolverConfig::resolve(self.solver.clone());
        VerifyConfig {
            k_max: self.k_max,
            loop_unroll: self.harness_bound,
            timeout: self.timeout,
            solver,
            dump_smt: self.dump_smt.clone(),
            ..VerifyConfig::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("conformance mode needs --policy")]
    MissingPolicy,
    #[error("no contract sources given")]
    NoSources,
    #[error("policy: {0}")]
    Policy(String),
    #[error("{file}:{message}")]
    Frontend { file: String, message: String },
    #[error("contract `{0}` is not defined")]
    UnknownRoot(String),
    #[error("contract does not match the policy")]
    NotConformant,
    #[error("instrumentation: {0}")]
    Instrument(String),
    #[error("translation: {0}")]
    Translate(String),
    #[error("verification: {0}")]
    Verify(String),
}

impl RunError {
    /// Solver trouble is a tool failure, everything else bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Verify(_) => 4,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportTimings {
    pub frontend_ms: u128,
    pub houdini_ms: u128,
    pub bmc_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub mode: Mode,
    pub root: String,
    /// Absent in instrument-only mode and when the run failed on its input.
    pub verdict: Option<Verdict>,
    /// Policy and syntactic-conformance problems.
    pub diagnostics: Vec<String>,
    /// Pretty-printed conjuncts of the inferred invariant.
    pub invariant: Vec<String>,
    /// One line per transaction, followed by the failing-assertion footer.
    pub trace: Vec<String>,
    /// Policy functions that no transition mentions.
    pub unconstrained: Vec<String>,
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<ReportTimings>,
}

impl Report {
    fn new(cfg: &RunConfig) -> Report {
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            mode: cfg.mode,
            root: cfg.root.clone(),
            verdict: None,
            diagnostics: vec![],
            invariant: vec![],
            trace: vec![],
            unconstrained: vec![],
            error: None,
            timings: None,
        }
    }

    pub fn verdict_name(&self) -> &'static str {
        match &self.verdict {
            Some(Verdict::FullyVerified { .. }) => "FullyVerified",
            Some(Verdict::Refuted { .. }) => "Refuted",
            Some(Verdict::PartiallyVerified { .. }) => "PartiallyVerified",
            None if self.error.is_some() => "Error",
            None => "Instrumented",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for d in &self.diagnostics {
            out += &format!("diagnostic: {d}\n");
        }
        if let Some(e) = &self.error {
            out += &format!("error: {e}\n");
            return out;
        }
        match &self.verdict {
            Some(Verdict::FullyVerified { .. }) => {
                out += "FullyVerified\n";
                if self.invariant.is_empty() {
                    out += "invariant: true\n";
                } else {
                    out += "invariant:\n";
                    for c in &self.invariant {
                        out += &format!("  {c}\n");
                    }
                }
            }
            Some(Verdict::Refuted { k, .. }) => {
                out += &format!("Refuted at k={k}\n");
                for l in &self.trace {
                    out += l;
                    out.push('\n');
                }
            }
            Some(Verdict::PartiallyVerified { bound }) => {
                out += &format!("PartiallyVerified: no violation within {bound} transactions after deployment\n");
            }
            None => out += "Instrumented\n",
        }
        for f in &self.unconstrained {
            out += &format!("note: function `{f}` appears in no transition and is unchecked\n");
        }
        out
    }
}

pub fn exit_code(v: &Verdict) -> i32 {
    match v {
        Verdict::FullyVerified { .. } => 0,
        Verdict::Refuted { .. } => 1,
        Verdict::PartiallyVerified { .. } => 2,
    }
}

/// Renders a trace as numbered transaction lines plus a footer naming the
/// failing assertion. With instrumentation data the footer and the last
/// line name the violated policy element.
pub fn render_trace(t: &CounterexampleTrace, inst: Option<&Instrumented>) -> Vec<String> {
    let origin = parse_label(&t.label).and_then(|s| inst.and_then(|i| i.origin(s)));
    let mut lines: Vec<String> = t.transactions.iter().enumerate().map(|(i, tx)| format!("tx{}: {tx}", i + 1)).collect();
    if let (Some(o), Some(last)) = (origin, lines.last_mut()) {
        *last += &format!(" - {o}");
    }
    lines.push(match origin {
        Some(o) => format!("failing assertion: policy check ({o})"),
        None => format!("failing assertion: {}", t.label),
    });
    lines
}

fn read(path: &Path) -> Result<String, RunError> {
    std::fs::read_to_string(path).map_err(|source| RunError::Io { path: path.display().to_string(), source })
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|source| RunError::Io { path: path.display().to_string(), source })
}

fn load_policy(cfg: &RunConfig, report: &mut Report) -> Result<Option<Policy>, RunError> {
    if cfg.mode != Mode::Conformance && cfg.policy.is_none() {
        return Ok(None);
    }
    let path = cfg.policy.as_ref().ok_or(RunError::MissingPolicy)?;
    let pol = parse_policy(&read(path)?).map_err(|e| RunError::Policy(e.to_string()))?;
    let diags = validate_policy(&pol);
    if !diags.is_empty() {
        report.diagnostics.extend(diags.iter().map(|d| d.to_string()));
        return Err(RunError::Policy(format!("{} problem(s) in {}", diags.len(), path.display())));
    }
    Ok(Some(pol))
}

fn load_program(cfg: &RunConfig) -> Result<TypedProgram, RunError> {
    if cfg.sources.is_empty() {
        return Err(RunError::NoSources);
    }
    let mut text = String::new();
    for p in &cfg.sources {
        text += &read(p)?;
        text.push('\n');
    }
    let file = cfg.sources.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join("+");
    let frontend = |e: solconform::sol::FrontendError| RunError::Frontend { file: file.clone(), message: e.to_string() };
    let tp = typecheck(&parse_contract(&text).map_err(frontend)?).map_err(frontend)?;
    if tp.contract(&cfg.root).is_none() {
        return Err(RunError::UnknownRoot(cfg.root.clone()));
    }
    Ok(tp)
}

fn pipeline(cfg: &RunConfig, report: &mut Report) -> Result<i32, RunError> {
    let start = Instant::now();
    let policy = load_policy(cfg, report)?;
    let tp = load_program(cfg)?;
    tracing::info!(contracts = tp.program.contracts.len(), "front end done");

    let inst = match (&policy, cfg.mode) {
        (Some(pol), Mode::Conformance | Mode::InstrumentOnly) => {
            let diags = check_syntactic_conformance(&tp, pol);
            if !diags.is_empty() {
                report.diagnostics.extend(diags.iter().map(|d| d.to_string()));
                return Err(RunError::NotConformant);
            }
            let inst = instrument_for_conformance(&tp, pol).map_err(|e| RunError::Instrument(e.to_string()))?;
            report.unconstrained = inst.unconstrained.clone();
            Some(inst)
        }
        _ => None,
    };
    let program = inst.as_ref().map_or(&tp, |i| &i.program);
    if let Some(path) = &cfg.emit_instrumented {
        let text = if cfg.runtime_checks { print_program(&make_runtime_checks(program).program) } else { print_program(&program.program) };
        write(path, &text)?;
    }

    let t = translate_program(program, &cfg.root).map_err(|e| RunError::Translate(e.to_string()))?;
    if let Some(path) = &cfg.emit_ir {
        write(path, &solconform::vir::print_program(&t.program))?;
    }
    let frontend_ms = start.elapsed().as_millis();
    if cfg.mode == Mode::InstrumentOnly {
        return Ok(0);
    }

    let cands = generate_candidates(program, &cfg.root, policy.as_ref());
    tracing::info!(candidates = cands.len(), "verifying");
    let out = verify(program, &t, &cands, &cfg.verify_config()).map_err(|e| RunError::Verify(e.to_string()))?;
    match &out.verdict {
        Verdict::FullyVerified { invariant } => report.invariant = invariant.iter().map(|c| c.to_string()).collect(),
        Verdict::Refuted { trace, .. } => report.trace = render_trace(trace, inst.as_ref()),
        Verdict::PartiallyVerified { .. } => {}
    }
    if cfg.report_timings {
        report.timings = Some(ReportTimings { frontend_ms, houdini_ms: out.timings.houdini_ms, bmc_ms: out.timings.bmc_ms });
    }
    let code = exit_code(&out.verdict);
    report.verdict = Some(out.verdict);
    Ok(code)
}

/// Runs the whole pipeline. Errors end up in the report, never as panics.
pub fn run(cfg: &RunConfig) -> (Report, i32) {
    let mut report = Report::new(cfg);
    let code = match pipeline(cfg, &mut report) {
        Ok(c) => c,
        Err(e) => {
            report.error = Some(e.to_string());
            e.exit_code()
        }
    };
    if let Some(path) = &cfg.report_json {
        if let Err(e) = write(path, &report.to_json()) {
            report.error.get_or_insert(e.to_string());
            return (report, 3);
        }
    }
    (report, code)
}

#[cfg(test)]
mod tests {
    use super::*;
    use solconform::verify::{TraceValue, Transaction};

    fn tx(f: &str, args: Vec<(String, TraceValue)>) -> Transaction {
        Transaction { function: f.into(), sender: TraceValue::Addr(0x1001), args, nondet: vec![] }
    }

    #[test]
    fn trace_lines_are_numbered_with_footer() {
        let t = CounterexampleTrace {
            transactions: vec![tx("constructor", vec![("m".into(), TraceValue::Str("hi".into()))]), tx("Accept", vec![])],
            label: "12:9".into(),
        };
        assert_eq!(
            render_trace(&t, None),
            ["tx1: constructor(m=\"hi\") sender=0x1001", "tx2: Accept() sender=0x1001", "failing assertion: 12:9"]
        );
    }

    #[test]
    fn missing_policy_is_an_input_error() {
        let cfg = RunConfig::new(Mode::Conformance, vec!["x.sol".into()], "C");
        let (r, code) = run(&cfg);
        assert_eq!(code, 3);
        assert_eq!(r.verdict_name(), "Error");
        assert!(r.to_text().contains("needs --policy"));
    }

    #[test]
    fn timings_are_left_out_of_json_by_default() {
        let cfg = RunConfig::new(Mode::Assertions, vec![], "C");
        let json = Report::new(&cfg).to_json();
        assert!(json.contains("\"schema_version\": 1"));
        assert!(!json.contains("timings"));
    }
}
