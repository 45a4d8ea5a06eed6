//! End-to-end checks of the verifier on small contracts.

use std::path::PathBuf;

use solconform::instrument::instrument_for_conformance;
use solconform::policy::parse_policy;
use solconform::sol::{parse_contract, typecheck, TypedProgram};
use solconform::translate::{translate_program, Translation};
use solconform::verify::{bmc, bmc::BmcResult, generate_candidates, houdini, verify, CandidatePredicate, Operand, VerifyConfig, Verdict};

fn fixture(rel: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn conformance(sol: &str, policy: &str, root: &str) -> (TypedProgram, Translation, Vec<CandidatePredicate>) {
    let tp = typecheck(&parse_contract(sol).unwrap()).unwrap();
    let pol = parse_policy(policy).unwrap();
    let inst = instrument_for_conformance(&tp, &pol).unwrap();
    let t = translate_program(&inst.program, root).unwrap();
    let cands = generate_candidates(&inst.program, root, Some(&pol));
    (inst.program, t, cands)
}

fn assertions(sol: &str, root: &str) -> (TypedProgram, Translation, Vec<CandidatePredicate>) {
    let tp = typecheck(&parse_contract(sol).unwrap()).unwrap();
    let t = translate_program(&tp, root).unwrap();
    let cands = generate_candidates(&tp, root, None);
    (tp, t, cands)
}

#[test]
fn hello_blockchain_is_fully_verified() {
    let (tp, t, cands) =
        conformance(&fixture("hello/HelloBlockchain.sol"), &fixture("hello/HelloBlockchain.json"), "HelloBlockchain");
    let out = verify(&tp, &t, &cands, &VerifyConfig::default()).unwrap();
    let Verdict::FullyVerified { invariant } = &out.verdict else { panic!("{:?}", out.verdict) };
    let text: Vec<String> = invariant.iter().map(|c| c.to_string()).collect();
    assert!(text.contains(&"Requestor != 0x0".to_string()), "{text:?}");
}

#[test]
fn hello_blockchain_has_no_bounded_counterexample() {
    let (tp, t, _) =
        conformance(&fixture("hello/HelloBlockchain.sol"), &fixture("hello/HelloBlockchain.json"), "HelloBlockchain");
    assert_eq!(bmc(&tp, &t, 4, &VerifyConfig::default()).unwrap(), BmcResult::Safe);
}

fn asset_transfer(file: &str) -> (TypedProgram, Translation, Vec<CandidatePredicate>) {
    conformance(&fixture(&format!("asset_transfer/{file}")), &fixture("asset_transfer/AssetTransfer.json"), "AssetTransfer")
}

#[test]
fn asset_transfer_deep_bug_is_refuted() {
    let (tp, t, cands) = asset_transfer("AssetTransfer.sol");
    let out = verify(&tp, &t, &cands, &VerifyConfig::default()).unwrap();
    let Verdict::Refuted { k, trace } = &out.verdict else { panic!("{:?}", out.verdict) };
    let names: Vec<&str> = trace.transactions.iter().map(|t| t.function.as_str()).collect();
    assert!(trace.transactions.len() >= 6, "{names:?}");
    assert_eq!(*k, trace.transactions.len() - 1);
    assert_eq!(names.last(), Some(&"Accept"));
}

#[test]
fn asset_transfer_fix_is_fully_verified() {
    let (tp, t, cands) = asset_transfer("AssetTransferFixed.sol");
    let out = verify(&tp, &t, &cands, &VerifyConfig::default()).unwrap();
    let Verdict::FullyVerified { invariant } = &out.verdict else { panic!("{:?}", out.verdict) };
    let text: Vec<String> = invariant.iter().map(|c| c.to_string()).collect();
    assert!(text.contains(&"InstanceOwner != 0x0".to_string()), "{text:?}");
    assert!(text.contains(&"InstanceOwner != InstanceBuyer".to_string()), "{text:?}");
}

#[test]
fn wrong_initial_state_is_refuted_by_the_deployment() {
    let pol = fixture("digital_locker/DigitalLocker.json");
    let (tp, t, cands) = conformance(&fixture("digital_locker/DigitalLocker.sol"), &pol, "DigitalLocker");
    let cfg = VerifyConfig { k_max: 1, ..VerifyConfig::default() };
    let out = verify(&tp, &t, &cands, &cfg).unwrap();
    let Verdict::Refuted { k, trace } = &out.verdict else { panic!("{:?}", out.verdict) };
    assert_eq!(*k, 1);
    assert_eq!(trace.transactions.len(), 1);
    assert_eq!(trace.transactions[0].function, "constructor");
    assert_eq!(trace.transactions[0].nondet, vec![true]);

    let (tp, t, cands) = conformance(&fixture("digital_locker/DigitalLockerFixed.sol"), &pol, "DigitalLocker");
    let out = verify(&tp, &t, &cands, &VerifyConfig { k_max: 3, ..VerifyConfig::default() }).unwrap();
    assert!(!matches!(out.verdict, Verdict::Refuted { .. }), "{:?}", out.verdict);
}

#[test]
fn failing_parameterless_function_gives_two_transactions() {
    let (tp, t, cands) = assertions("contract C { int x; function f1() public { assert(false); } function f2() public { x = 1; } }", "C");
    let out = verify(&tp, &t, &cands, &VerifyConfig::default()).unwrap();
    let Verdict::Refuted { k: 1, trace } = &out.verdict else { panic!("{:?}", out.verdict) };
    let names: Vec<&str> = trace.transactions.iter().map(|t| t.function.as_str()).collect();
    assert_eq!(names, ["constructor", "f1"]);
    assert!(trace.transactions[1].args.is_empty());
}

const COUNTER: &str = "contract Counter {
    int x;
    function step(int d) public {
        require(d == 0 || d == 1);
        x = x + d;
        assert(x < 3);
    }
    function reset() public { x = 0; }
}";

#[test]
fn counter_fails_after_three_increments() {
    let (tp, t, _) = assertions(COUNTER, "Counter");
    let cfg = VerifyConfig::default();
    assert_eq!(bmc(&tp, &t, 2, &cfg).unwrap(), BmcResult::Safe);
    let BmcResult::Counterexample(trace) = bmc(&tp, &t, 3, &cfg).unwrap() else { panic!() };
    assert_eq!(trace.transactions.len(), 4);
    assert!(trace.transactions[1..].iter().all(|t| t.function == "step" && t.args[0].1.to_string() == "1"));
}

fn int_member(v: i64) -> Operand {
    Operand::Member { name: v.to_string(), value: v }
}

#[test]
fn houdini_keeps_only_the_established_constant() {
    let src = "contract C { int x; constructor() public { x = 1; } function f() public { assert(x == 1); } }";
    let (_, t, _) = assertions(src, "C");
    let x = Operand::State { var: "x".into(), contract: "C".into() };
    let cands: Vec<CandidatePredicate> =
        [1, 2].iter().map(|&v| CandidatePredicate { lhs: x.clone(), rhs: int_member(v), equal: true }).collect();
    let h = houdini(&t, &cands, &VerifyConfig::default()).unwrap();
    assert_eq!(h.invariant, vec![cands[0].clone()]);
    assert!(h.asserts_verified);
    assert!(h.rounds <= cands.len() + 1);
}

#[test]
fn empty_pool_proves_only_unconditional_asserts() {
    let cfg = VerifyConfig::default();
    let (_, t, _) = assertions("contract C { int x; function f() public { x = 2; assert(x == 2); } }", "C");
    let h = houdini(&t, &[], &cfg).unwrap();
    assert!(h.invariant.is_empty() && h.asserts_verified);
    let (_, t, _) = assertions("contract C { int x; function f() public { assert(x == 0); } }", "C");
    assert!(!houdini(&t, &[], &cfg).unwrap().asserts_verified);
}

#[test]
fn disjunctive_invariant_is_only_partially_verified() {
    // x + y == 1 holds but is outside the template.
    let src = "contract C {
        int x; int y;
        constructor() public { y = 1; }
        function swap() public { int t = x; x = y; y = t; assert(x + y == 1); }
    }";
    let (tp, t, cands) = assertions(src, "C");
    assert!(cands.is_empty());
    let out = verify(&tp, &t, &cands, &VerifyConfig { k_max: 3, ..VerifyConfig::default() }).unwrap();
    assert_eq!(out.verdict, Verdict::PartiallyVerified { bound: 3 });
}
