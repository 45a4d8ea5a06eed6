//! SMT-LIB2 queries and the external solver process.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::Duration;

use num_bigint::BigInt;
use wait_timeout::ChildExt;

use super::sexp::{parse_all, Sexp};
use super::VerifyError;

/// How to launch the solver. It must read a script from standard input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl SolverConfig {
    /// `path`, else `$SMT_SOLVER`, else `z3` from the search path.
    pub fn resolve(path: Option<PathBuf>) -> SolverConfig {
        let program = path
            .or_else(|| std::env::var_os("SMT_SOLVER").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("z3"));
        SolverConfig { program, args: vec!["-in".into(), "-smt2".into()] }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::resolve(None)
    }
}

/// A complete script plus the mapping from SMT names back to IR symbols.
#[derive(Debug, Clone)]
pub struct SmtQuery {
    /// Used for dump file names.
    pub name: String,
    pub script: String,
    pub symbols: HashMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ModelValue {
    Int(BigInt),
    Bool(bool),
    /// An element of an uninterpreted sort, e.g. `Ref!val!3`.
    Elem(String),
}

pub type Model = HashMap<String, ModelValue>;

#[derive(Debug, Clone, PartialEq)]
pub enum SmtResult {
    Sat(Model),
    Unsat,
    Unknown,
}

fn value(s: &Sexp) -> Option<ModelValue> {
    match s {
        Sexp::Atom(a) if a == "true" => Some(ModelValue::Bool(true)),
        Sexp::Atom(a) if a == "false" => Some(ModelValue::Bool(false)),
        Sexp::Atom(a) => match a.parse::<BigInt>() {
            Ok(i) => Some(ModelValue::Int(i)),
            Err(_) if a.contains("!val!") => Some(ModelValue::Elem(a.clone())),
            Err(_) => None,
        },
        Sexp::List(l) => match l.as_slice() {
            [Sexp::Atom(m), x] if m == "-" => match value(x)? {
                ModelValue::Int(i) => Some(ModelValue::Int(-i)),
                _ => None,
            },
            _ => None,
        },
    }
}

/// Reads the constant definitions of a `(get-model)` response. Functions
/// with arguments and array values are skipped.
pub fn parse_model(model: &Sexp) -> Model {
    let mut out = Model::new();
    for d in model.list().unwrap_or_default() {
        let Some([Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(args), _, v]) = d.list() else { continue };
        if kw != "define-fun" || !args.is_empty() {
            continue;
        }
        if let Some(v) = value(v) {
            out.insert(name.trim_matches('|').to_string(), v);
        }
    }
    out
}

/// Interprets raw solver output for a script ending in
/// `(check-sat) (get-model)`.
pub fn parse_response(text: &str) -> Result<SmtResult, VerifyError> {
    let items = parse_all(text).map_err(|e| VerifyError::SolverCrashed(format!("{e}: {text}")))?;
    let mut it = items.iter();
    while let Some(s) = it.next() {
        match s.atom() {
            Some("sat") => {
                let m = it.next().map(parse_model).unwrap_or_default();
                return Ok(SmtResult::Sat(m));
            }
            Some("unsat") => return Ok(SmtResult::Unsat),
            Some("unknown" | "timeout") => return Ok(SmtResult::Unknown),
            _ => {
                if let Some([Sexp::Atom(e), msg]) = s.list() {
                    if e == "error" {
                        return Err(VerifyError::SolverCrashed(msg.to_string()));
                    }
                }
            }
        }
    }
    Err(VerifyError::SolverCrashed(format!("no verdict in solver output: {text}")))
}

/// Runs one query in a private solver process.
pub fn check_smt(solver: &SolverConfig, q: &SmtQuery, timeout: Duration) -> Result<SmtResult, VerifyError> {
    let mut child = Command::new(&solver.program)
        .args(&solver.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| VerifyError::SolverUnavailable(format!("{}: {e}", solver.program.display())))?;
    let mut stdout = child.stdout.take().expect("piped");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    {
        let mut stdin = child.stdin.take().expect("piped");
        let ms = timeout.as_millis();
        stdin
            .write_all(format!("(set-option :timeout {ms})\n{}", q.script).as_bytes())
            .map_err(|e| VerifyError::SolverCrashed(e.to_string()))?;
    }
    // The solver's own timeout normally fires first; this is a backstop.
    match child.wait_timeout(timeout + Duration::from_secs(5)).map_err(|e| VerifyError::SolverCrashed(e.to_string()))? {
        Some(_) => {}
        None => {
            let _ = child.kill();
            let _ = child.wait();
            tracing::warn!(query = %q.name, "solver killed after timeout");
            return Ok(SmtResult::Unknown);
        }
    }
    let out = reader.join().unwrap_or_default();
    let r = parse_response(&out)?;
    tracing::debug!(query = %q.name, result = ?std::mem::discriminant(&r), "solver answered");
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> SmtQuery {
        SmtQuery { name: "t".into(), script: format!("(set-logic ALL)\n{s}\n(check-sat)\n(get-model)\n(exit)\n"), symbols: HashMap::new() }
    }

    #[test]
    fn parses_sat_unsat_and_model_values() {
        let r = parse_response("sat\n((define-fun |x@2| () Int (- 3)) (define-fun b () Bool true) (define-fun r () Ref Ref!val!0) (define-fun f ((x Int)) Int x))").unwrap();
        let SmtResult::Sat(m) = r else { panic!() };
        assert_eq!(m["x@2"], ModelValue::Int((-3).into()));
        assert_eq!(m["b"], ModelValue::Bool(true));
        assert_eq!(m["r"], ModelValue::Elem("Ref!val!0".into()));
        assert!(!m.contains_key("f"));
        assert_eq!(parse_response("unsat\n(error \"model is not available\")").unwrap(), SmtResult::Unsat);
        assert_eq!(parse_response("unknown\n").unwrap(), SmtResult::Unknown);
    }

    #[test]
    fn trivial_scripts_against_the_solver() {
        let s = SolverConfig::default();
        let t = Duration::from_secs(10);
        assert!(matches!(check_smt(&s, &q("(assert true)"), t).unwrap(), SmtResult::Sat(_)));
        assert_eq!(check_smt(&s, &q("(assert false)"), t).unwrap(), SmtResult::Unsat);
    }

    #[test]
    fn missing_solver_is_reported() {
        let s = SolverConfig { program: "/nonexistent/solver".into(), args: vec![] };
        assert!(matches!(check_smt(&s, &q("(assert true)"), Duration::from_secs(1)), Err(VerifyError::SolverUnavailable(_))));
    }
}
