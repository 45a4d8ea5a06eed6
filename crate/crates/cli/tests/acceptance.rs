//! Acceptance suite: one line per criterion, each checked against an
//! independent oracle where one exists. Runs without the test harness so
//! that the lines are always shown.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use solconform::instrument::instrument_for_conformance;
use solconform::policy::parse_policy;
use solconform::sol::{parse_contract, typecheck, TypedProgram};
use solconform::translate::{translate_program, Translation};
use solconform::verify::bmc::{replay_source, BmcResult};
use solconform::verify::{bmc, generate_candidates, houdini, Verdict, VerifyConfig};
use solconform_cli::{run, Mode, Report, RunConfig};
use solconform_oracles::equivalence::{check_companion, check_random_programs, Tally};
use solconform_oracles::search::{check_runtime_checks, greatest_inductive_subset, shortest_failure};
use solconform_oracles::{fixture, fixture_path};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn program(src: &str) -> Result<TypedProgram, String> {
    typecheck(&parse_contract(src).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

fn translate(tp: &TypedProgram, root: &str) -> Result<Translation, String> {
    translate_program(tp, root).map_err(|e| e.to_string())
}

fn conformance_run(dir: &str, sol: &str, policy: &str, root: &str, k: usize) -> RunConfig {
    RunConfig {
        policy: Some(fixture_path(&format!("{dir}/{policy}"))),
        k_max: k,
        ..RunConfig::new(Mode::Conformance, vec![fixture_path(&format!("{dir}/{sol}"))], root)
    }
}

fn timed_run(cfg: &RunConfig, limit: Duration) -> Result<(Report, i32, Duration), String> {
    let start = Instant::now();
    let (report, code) = run(cfg);
    let took = start.elapsed();
    if let Some(e) = &report.error {
        return Err(e.clone());
    }
    ensure(took <= limit, format!("took {took:?}, limit {limit:?}"))?;
    Ok((report, code, took))
}

fn hello_blockchain() -> Check {
    let cfg = conformance_run("hello", "HelloBlockchain.sol", "HelloBlockchain.json", "HelloBlockchain", 6);
    let (r, code, took) = timed_run(&cfg, Duration::from_secs(60))?;
    ensure(code == 0 && matches!(r.verdict, Some(Verdict::FullyVerified { .. })), format!("verdict {}", r.verdict_name()))?;
    Ok(format!("FullyVerified in {took:.1?}, invariant [{}]", r.invariant.join(", ")))
}

fn initial_state_bug() -> Check {
    let cfg = conformance_run("digital_locker", "DigitalLocker.sol", "DigitalLocker.json", "DigitalLocker", 1);
    let (r, code, took) = timed_run(&cfg, Duration::from_secs(30))?;
    let Some(Verdict::Refuted { k, trace }) = &r.verdict else { return Err(format!("verdict {}", r.verdict_name())) };
    ensure(code == 1 && *k == 1, format!("exit {code}, k={k}"))?;
    ensure(trace.transactions.len() == 1, format!("{} transactions", trace.transactions.len()))?;
    ensure(r.trace[0].contains("violates initial state Requested"), r.trace[0].clone())?;
    Ok(format!("Refuted at k=1 in {took:.1?}: {}", r.trace[0]))
}

fn deep_bug_and_fix() -> Check {
    let limit = Duration::from_secs(600);
    let cfg = conformance_run("asset_transfer", "AssetTransfer.sol", "AssetTransfer.json", "AssetTransfer", 8);
    let (r, code, took) = timed_run(&cfg, limit)?;
    let Some(Verdict::Refuted { k, trace }) = &r.verdict else { return Err(format!("buggy: verdict {}", r.verdict_name())) };
    let n = trace.transactions.len();
    ensure(code == 1 && *k <= 8 && n >= 6, format!("buggy: exit {code}, k={k}, {n} transactions"))?;
    ensure(trace.transactions.last().map(|t| t.function.as_str()) == Some("Accept"), "buggy: trace does not end in Accept")?;

    let cfg = conformance_run("asset_transfer", "AssetTransferFixed.sol", "AssetTransfer.json", "AssetTransfer", 8);
    let (fixed, code, took_fixed) = timed_run(&cfg, limit)?;
    ensure(code == 0, format!("fixed: verdict {}", fixed.verdict_name()))?;
    for needed in ["InstanceOwner != 0x0", "InstanceOwner != InstanceBuyer"] {
        ensure(fixed.invariant.iter().any(|c| c == needed), format!("fixed: invariant lacks {needed}"))?;
    }
    Ok(format!("bug refuted at k={k} with {n} transactions in {took:.1?}; fix FullyVerified in {took_fixed:.1?}"))
}

fn translation_goldens() -> Check {
    let tp = program("contract C { mapping(int => int[]) x; int y; function f() public { y = x[0][1]; } }")?;
    let t = translate(&tp, "C")?;
    let body: Vec<String> = t.program.procedure("f_C").ok_or("no f_C")?.body.items().iter().map(|s| s.to_string()).collect();
    let expr = ["y_C[this] := M_int_int[M_int_Ref[x_C[this]][0]][1];"];
    ensure(body == expr, format!("expression: {body:?}"))?;

    let tp = program(
        "contract C { mapping(int => mapping(int => int)) x; function f() public { x = new mapping(int => mapping(int => int))(); } }",
    )?;
    let t = translate(&tp, "C")?;
    // Generated names are normalized to the ones of the reference listing.
    let got: Vec<String> = t
        .program
        .procedure("f_C")
        .ok_or("no f_C")?
        .body
        .items()
        .iter()
        .map(|s| s.to_string().replace("__new1", "v").replace("i1", "i").replace("j1", "j").replace("i2", "j"))
        .collect();
    let expected = [
        "call v := New();",
        "assume Length[v] == 0;",
        "assume (forall i: int :: Length[M_int_Ref[v][i]] == 0);",
        "assume (forall i: int :: !Alloc[M_int_Ref[v][i]]);",
        "call NewUnbounded();",
        "assume (forall i: int :: Alloc[M_int_Ref[v][i]]);",
        "assume (forall i: int, j: int :: i == j || M_int_Ref[v][i] != M_int_Ref[v][j]);",
        "assume (forall i: int, j: int :: M_int_int[M_int_Ref[v][i]][j] == 0);",
        "x_C[this] := v;",
    ];
    ensure(got == expected, format!("statement sequence: {got:#?}"))?;
    Ok(format!("expression and {}-statement allocation match", expected.len()))
}

fn dual_interpreters() -> Check {
    check_companion(&VerifyConfig::default())?;
    let mut tally = Tally::default();
    let programs = check_random_programs(0..30, &mut tally)?;
    ensure(programs >= 20, format!("only {programs} programs exercised"))?;
    Ok(format!("companion asserts proved; {programs} random programs, {} runs agree", tally.runs))
}

const FINITE: [(&str, &str, Option<usize>); 5] = [
    ("Counter.sol", "Counter", Some(3)),
    ("Lock.sol", "Lock", Some(2)),
    ("Cycle.sol", "Cycle", None),
    ("Ledger.sol", "Ledger", Some(3)),
    ("Stages.sol", "Stages", Some(4)),
];

fn bounded_completeness() -> Check {
    let cfg = VerifyConfig::default();
    let mut summary = vec![];
    for (file, root, expected) in FINITE {
        let tp = program(&fixture(&format!("finite/{file}")))?;
        let t = translate(&tp, root)?;
        let depth = shortest_failure(&tp, root, 4, &[-1, 0, 1, 2, 3])?;
        ensure(depth == expected, format!("{root}: search found depth {depth:?}, fixture documents {expected:?}"))?;
        for k in 0..=4 {
            let cex = match bmc(&tp, &t, k, &cfg).map_err(|e| format!("{root} k={k}: {e}"))? {
                BmcResult::Counterexample(_) => true,
                BmcResult::Safe => false,
                BmcResult::Unknown => return Err(format!("{root} k={k}: solver unknown")),
            };
            let want = depth.is_some_and(|d| d <= k);
            ensure(cex == want, format!("{root} k={k}: bounded check says {cex}, search depth {depth:?}"))?;
        }
        summary.push(format!("{root}:{}", depth.map_or("safe".into(), |d| d.to_string())));
    }
    Ok(format!("k=0..4 agree on {}", summary.join(" ")))
}

const HOUDINI: [(&str, &str); 5] =
    [("Phases.sol", "Phases"), ("Delegate.sol", "Delegate"), ("Relay.sol", "Relay"), ("Mirror.sol", "Mirror"), ("Steps.sol", "Steps")];

fn houdini_maximality() -> Check {
    let cfg = VerifyConfig::default();
    let mut summary = vec![];
    for (file, root) in HOUDINI {
        let tp = program(&fixture(&format!("houdini/{file}")))?;
        let t = translate(&tp, root)?;
        let cands = generate_candidates(&tp, root, None);
        ensure(!cands.is_empty() && cands.len() <= 8, format!("{root}: {} candidates", cands.len()))?;
        let h = houdini(&t, &cands, &cfg).map_err(|e| e.to_string())?;
        let oracle: BTreeSet<String> =
            greatest_inductive_subset(&t, &cands, &cfg)?.iter().map(|&i| cands[i].to_string()).collect();
        let got: BTreeSet<String> = h.invariant.iter().map(|c| c.to_string()).collect();
        ensure(got == oracle, format!("{root}: inferred {got:?}, greatest inductive {oracle:?}"))?;
        summary.push(format!("{root}:{}/{}", got.len(), cands.len()));
    }
    Ok(format!("inferred = greatest inductive subset on {}", summary.join(" ")))
}

fn assertion_misuse() -> Check {
    let src = fixture("poa/Registry.sol");
    let (line, col) = src
        .lines()
        .enumerate()
        .find_map(|(i, l)| l.find("assert(").map(|c| (i + 1, c + 1)))
        .ok_or("fixture has no assert")?;
    let cfg = RunConfig { k_max: 4, ..RunConfig::new(Mode::Assertions, vec![fixture_path("poa/Registry.sol")], "Registry") };
    let (r, code, _) = timed_run(&cfg, Duration::from_secs(600))?;
    let Some(Verdict::Refuted { trace, .. }) = &r.verdict else { return Err(format!("Registry: verdict {}", r.verdict_name())) };
    ensure(code == 1 && trace.label == format!("{line}:{col}"), format!("Registry: fails {} instead of {line}:{col}", trace.label))?;
    replay_source(&program(&src)?, "Registry", trace).map_err(|e| e.to_string())?;

    let src = fixture("poa/ValidatorSet.sol");
    let cfg =
        RunConfig { k_max: 4, ..RunConfig::new(Mode::Assertions, vec![fixture_path("poa/ValidatorSet.sol")], "ValidatorSet") };
    let (r, _, _) = timed_run(&cfg, Duration::from_secs(600))?;
    let Some(Verdict::Refuted { k, trace }) = &r.verdict else { return Err(format!("ValidatorSet: verdict {}", r.verdict_name())) };
    replay_source(&program(&src)?, "ValidatorSet", trace).map_err(|e| e.to_string())?;
    let removals = trace.transactions.iter().filter(|t| t.function == "removeValidator").count();
    ensure(removals == 2, format!("ValidatorSet: {removals} removals"))?;
    Ok(format!("misused assert fails at {line}:{col} and replays; double removal refuted at k={k}"))
}

const POLICY_FIXTURES: [(&str, &str, &str, &str); 5] = [
    ("hello", "HelloBlockchain.sol", "HelloBlockchain.json", "HelloBlockchain"),
    ("asset_transfer", "AssetTransfer.sol", "AssetTransfer.json", "AssetTransfer"),
    ("asset_transfer", "AssetTransferFixed.sol", "AssetTransfer.json", "AssetTransfer"),
    ("digital_locker", "DigitalLocker.sol", "DigitalLocker.json", "DigitalLocker"),
    ("digital_locker", "DigitalLockerFixed.sol", "DigitalLocker.json", "DigitalLocker"),
];

fn runtime_checks() -> Check {
    let (mut checks, mut atoms) = (0, 0);
    for (dir, sol, policy, root) in POLICY_FIXTURES {
        let tp = program(&fixture(&format!("{dir}/{sol}")))?;
        let pol = parse_policy(&fixture(&format!("{dir}/{policy}"))).map_err(|e| e.to_string())?;
        let inst = instrument_for_conformance(&tp, &pol).map_err(|e| format!("{root}: {e}"))?;
        let s = check_runtime_checks(&inst.program, 4).map_err(|e| format!("{sol}: {e}"))?;
        checks += s.checks;
        atoms = atoms.max(s.max_atoms);
    }
    ensure(atoms > 0, "no fixture exercises nondet()")?;
    Ok(format!("{checks} checks nondet-free and implied (up to {atoms} atoms)"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("HelloBlockchain conformance is fully verified", hello_blockchain),
        ("initial-state bug refuted by one transaction", initial_state_bug),
        ("deep transition bug refuted, fix fully verified", deep_bug_and_fix),
        ("translation goldens", translation_goldens),
        ("source and IR semantics agree", dual_interpreters),
        ("bounded checking agrees with exhaustive search", bounded_completeness),
        ("Houdini finds the greatest inductive subset", houdini_maximality),
        ("assert-as-require and double removal refuted", assertion_misuse),
        ("runtime checks are nondet-free and implied", runtime_checks),
    ];
    // The timed criteria run alone first so that solver contention from the
    // oracles does not distort their timings.
    let mut results: Vec<Check> = criteria[..3].iter().map(|(_, f)| f()).collect();
    results.extend(std::thread::scope(|s| {
        let handles: Vec<_> = criteria[3..].iter().map(|(_, f)| s.spawn(f)).collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err("panicked".into()))).collect::<Vec<_>>()
    }));
    let mut failed = vec![];
    for (i, ((name, _), r)) in criteria.iter().zip(&results).enumerate() {
        match r {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                println!("criterion {}: FAIL {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
