//! The translation must preserve the source semantics, checked on random
//! programs and on a hand-written program with nested mappings.

use solconform::sol::{parse_contract, typecheck};
use solconform::translate::translate_program;
use solconform::verify::{bmc, bmc::BmcResult, VerifyConfig};
use solconform_oracles::equivalence::{check_companion, check_random_programs, Tally, COMPANION};

#[test]
fn random_programs_agree_under_both_interpreters() {
    let mut tally = Tally::default();
    let programs = check_random_programs(0..30, &mut tally).unwrap_or_else(|e| panic!("{e}"));
    println!("{programs} programs, {} runs, {} txs: {} completed, {} reverted, {} assert failures", tally.runs, tally.txs, tally.done, tally.reverted, tally.asserts);
    assert!(programs >= 20, "only {programs} programs exercised");
    assert!(tally.done > 0 && tally.reverted > 0 && tally.asserts > 0, "outcomes not diverse");
}

#[test]
fn companion_example_asserts_hold_in_both_semantics() {
    let tp = typecheck(&parse_contract(COMPANION).unwrap()).unwrap();
    let t = translate_program(&tp, "C").unwrap();
    let b = t.program.procedure("Ctor_B").unwrap().body.items();
    assert_eq!(b[0].to_string(), "call Ctor_A(this, msg_sender);");
    check_companion(&VerifyConfig::default()).unwrap();
}

#[test]
fn companion_example_with_aliasing_assert_is_refuted() {
    for (from, to) in [("assert (m[0] == 11);", "assert (m[0] == 21);"), ("assert (n[0][0] == 22);", "assert (n[0][0] == 0);")] {
        let src = COMPANION.replace(from, to);
        let tp = typecheck(&parse_contract(&src).unwrap()).unwrap();
        let t = translate_program(&tp, "C").unwrap();
        let BmcResult::Counterexample(trace) = bmc(&tp, &t, 0, &VerifyConfig::default()).unwrap() else { panic!("{to}") };
        assert_eq!(trace.transactions.len(), 1);
    }
}

#[test]
fn senders_are_threaded_through_calls() {
    let t = translate_program(&typecheck(&parse_contract(COMPANION).unwrap()).unwrap(), "C").unwrap();
    let mut checked = 0;
    for p in &t.program.procedures {
        p.body.visit(&mut |s| {
            if let solconform::vir::IrStmt::Call { proc, args, .. } = s {
                if proc == "F_A" || proc == "F_B" {
                    // External call from C: the sender is C's `this`.
                    assert_eq!(args.last().unwrap().to_string(), "this");
                    assert_eq!(args[0].to_string(), "a_C[this]");
                    checked += 1;
                }
            }
        });
    }
    assert_eq!(checked, 2);
}

