//! Independent oracles used to cross-check the verifier: a differential
//! translation check, exhaustive transaction search, brute-force invariant
//! enumeration and truth-table checking of runtime checks.

pub mod equivalence;
pub mod search;

use std::path::PathBuf;

/// Reads a file from the workspace `fixtures` directory.
pub fn fixture(rel: &str) -> String {
    let p = fixture_path(rel);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub fn fixture_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}
