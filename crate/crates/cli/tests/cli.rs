//! Runs the binary: exit codes, reports and emitted artifacts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn solconform(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solconform")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("solconform-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn hello_blockchain_exits_zero_with_invariant() {
    let sol = fixture("hello/HelloBlockchain.sol");
    let pol = fixture("hello/HelloBlockchain.json");
    let o = solconform(&["--policy", path(&pol), "--sol", path(&sol), "--root", "HelloBlockchain"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.starts_with("FullyVerified\ninvariant:\n"), "{text}");
    assert!(text.contains("  Requestor != 0x0\n"), "{text}");
}

#[test]
fn input_errors_exit_three() {
    let sol = fixture("hello/HelloBlockchain.sol");
    let o = solconform(&["--sol", path(&sol), "--root", "HelloBlockchain"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout(&o), "error: conformance mode needs --policy\n");

    let o = solconform(&["--mode", "assertions", "--sol", "/nonexistent/x.sol", "--root", "X"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).starts_with("error: /nonexistent/x.sol: "));

    let dir = scratch("bad");
    let bad = dir.join("bad.sol");
    std::fs::write(&bad, "contract C {\n  int x\n}\n").unwrap();
    let o = solconform(&["--mode", "assertions", "--sol", path(&bad), "--root", "C"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains(":3:1: parse error"), "{}", stdout(&o));

    let o = solconform(&["--mode", "assertions", "--sol", path(&sol), "--root", "Missing"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn nonconforming_contract_lists_diagnostics() {
    let dir = scratch("nonconforming");
    let sol = dir.join("c.sol");
    std::fs::write(&sol, "contract HelloBlockchain { int x; }").unwrap();
    let pol = fixture("hello/HelloBlockchain.json");
    let o = solconform(&["--policy", path(&pol), "--sol", path(&sol), "--root", "HelloBlockchain"]);
    assert_eq!(o.status.code(), Some(3));
    let text = stdout(&o);
    assert!(text.contains("diagnostic: contract `HelloBlockchain` has no `State` variable"), "{text}");
    assert!(text.ends_with("error: contract does not match the policy\n"), "{text}");
}

#[test]
fn refuted_report_is_deterministic() {
    let dir = scratch("determinism");
    let sol = fixture("digital_locker/DigitalLocker.sol");
    let pol = fixture("digital_locker/DigitalLocker.json");
    let run = |name: &str, extra: &[&str]| {
        let json = dir.join(name);
        let mut args = vec!["--policy", path(&pol), "--sol", path(&sol), "--root", "DigitalLocker", "--k", "1"];
        args.extend(["--report-json", path(&json)]);
        args.extend(extra);
        let o = solconform(&args);
        assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
        (stdout(&o), std::fs::read_to_string(json).unwrap())
    };
    let (text, a) = run("a.json", &[]);
    let (_, b) = run("b.json", &[]);
    assert_eq!(a, b);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "Refuted at k=1");
    assert!(lines[1].starts_with("tx1: constructor("), "{text}");
    assert!(lines[1].ends_with(" - violates initial state Requested of workflow DigitalLocker"), "{text}");
    assert_eq!(lines[2], "failing assertion: policy check (violates initial state Requested of workflow DigitalLocker)");

    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["verdict"]["verdict"], "Refuted");
    assert_eq!(v["verdict"]["trace"]["transactions"].as_array().unwrap().len(), 1);
    assert!(v.get("timings").is_none());

    let (_, c) = run("c.json", &["--report-timings"]);
    let v: serde_json::Value = serde_json::from_str(&c).unwrap();
    assert!(v["timings"]["houdini_ms"].is_number());
}

#[test]
fn emitted_artifacts() {
    let dir = scratch("emit");
    let sol = fixture("hello/HelloBlockchain.sol");
    let pol = fixture("hello/HelloBlockchain.json");
    let (inst, rt, ir) = (dir.join("inst.sol"), dir.join("rt.sol"), dir.join("prog.vir"));
    let base = ["--policy", path(&pol), "--sol", path(&sol), "--root", "HelloBlockchain", "--mode", "instrument-only"];

    let o = solconform(&[&base[..], &["--emit-instrumented", path(&inst), "--emit-ir", path(&ir)]].concat());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "Instrumented\n");
    let text = std::fs::read_to_string(&inst).unwrap();
    assert!(text.contains("modifier SendRequest_checker()") && text.contains("nondet()"), "{text}");
    let vir = std::fs::read_to_string(&ir).unwrap();
    assert!(vir.contains("procedure SendRequest_HelloBlockchain("), "{vir}");

    let o = solconform(&[&base[..], &["--emit-instrumented", path(&rt), "--runtime-checks"]].concat());
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&rt).unwrap();
    // Only the declaration of nondet() remains.
    assert_eq!(text.matches("nondet()").count(), 1, "{text}");

    let smt = dir.join("smt");
    let reg = fixture("poa/Registry.sol");
    let o = solconform(&["--mode", "assertions", "--sol", path(&reg), "--root", "Registry", "--k", "2", "--dump-smt", path(&smt)]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    let mut names: Vec<String> =
        std::fs::read_dir(&smt).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert!(names.contains(&"Main_bmc_2.smt2".to_string()), "{names:?}");
}

#[test]
fn bounded_result_exits_two() {
    let sol = fixture("poa/ValidatorSetFixed.sol");
    let o = solconform(&["--mode", "assertions", "--sol", path(&sol), "--root", "ValidatorSet", "--k", "2"]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert_eq!(stdout(&o), "PartiallyVerified: no violation within 2 transactions after deployment\n");
}
