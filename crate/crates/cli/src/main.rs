use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, ValueEnum};
use tracing_subscriber::EnvFilter;

use solconform_cli::{run, Mode, RunConfig};

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Conformance,
    Assertions,
    InstrumentOnly,
}

/// Verifies Solidity-subset contracts against workflow policies or their own assertions.
#[derive(Parser)]
#[command(name = "solconform", version)]
struct Args {
    #[arg(long, value_enum, default_value = "conformance")]
    mode: ModeArg,
    /// Workflow policy (JSON); required in conformance mode.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Contract source; may be repeated.
    #[arg(long = "sol", required = true)]
    sol: Vec<PathBuf>,
    /// Contract to deploy.
    #[arg(long)]
    root: String,
    /// Largest number of calls after deployment explored by bounded checking.
    #[arg(long = "k", default_value_t = 6)]
    k: usize,
    /// Unrolling depth for loops inside functions.
    #[arg(long, default_value_t = 8)]
    harness_bound: usize,
    /// SMT solver executable (default: $SMT_SOLVER, then z3).
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Per-query solver timeout in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    #[arg(long)]
    emit_instrumented: Option<PathBuf>,
    /// Emit the runtime-checking variant of the instrumented source.
    #[arg(long)]
    runtime_checks: bool,
    #[arg(long)]
    emit_ir: Option<PathBuf>,
    #[arg(long)]
    dump_smt: Option<PathBuf>,
    #[arg(long)]
    report_json: Option<PathBuf>,
    /// Include phase timings in the JSON report.
    #[arg(long)]
    report_timings: bool,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let a = Args::parse();
    let mode = match a.mode {
        ModeArg::Conformance => Mode::Conformance,
        ModeArg::Assertions => Mode::Assertions,
        ModeArg::InstrumentOnly => Mode::InstrumentOnly,
    };
    let cfg = RunConfig {
        policy: a.policy,
        k_max: a.k,
        harness_bound: a.harness_bound,
        solver: a.solver,
        timeout: Duration::from_secs(a.timeout),
        emit_instrumented: a.emit_instrumented,
        runtime_checks: a.runtime_checks,
        emit_ir: a.emit_ir,
        dump_smt: a.dump_smt,
        report_json: a.report_json,
        report_timings: a.report_timings,
        ..RunConfig::new(mode, a.sol, &a.root)
    };
    let (report, code) = run(&cfg);
    print!("{}", report.to_text());
    ExitCode::from(code as u8)
}
