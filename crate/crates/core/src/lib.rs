//! Conformance checking of Solidity-subset contracts against workflow
//! policies.
//!
//! The pipeline parses and checks a contract ([`sol`]), instruments it with
//! policy assertions ([`instrument`]), translates it to a small verification
//! IR ([`vir`], [`translate`]) and discharges the assertions with invariant
//! inference and bounded model checking over an SMT solver ([`verify`]).

pub mod instrument;
pub mod policy;
pub mod sol;
pub mod translate;
pub mod verify;
pub mod vir;
