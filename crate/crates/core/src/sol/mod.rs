//! Front end for the Solidity subset: parsing, printing, type checking,
//! inheritance linearization, modifier desugaring, syntactic conformance
//! against a policy, and a reference interpreter.

pub mod ast;
pub mod conformance;
pub mod desugar;
pub mod interp;
pub mod lexer;
pub mod linearize;
pub mod parser;
pub mod printer;
pub mod typeck;

use thiserror::Error;

pub use ast::*;
pub use conformance::{check_syntactic_conformance, ConformanceDiagnostic};
pub use desugar::desugar_modifiers;
pub use linearize::linearize;
pub use parser::parse_contract;
pub use printer::print_program;
pub use typeck::{typecheck, TypedProgram};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum FrontendError {
    #[error("{line}:{col}: parse error: expected {expected}, found {found}")]
    Parse { line: u32, col: u32, expected: String, found: String },
    #[error("{line}:{col}: unsupported feature: {name}")]
    UnsupportedFeature { name: String, line: u32, col: u32 },
    #[error("{line}:{col}: type error: {message}")]
    Type { line: u32, col: u32, message: String },
    #[error("{line}:{col}: assignment would deep-copy an array or mapping, which is not supported")]
    DeepCopyUnsupported { line: u32, col: u32 },
    #[error("inheritance cycle through contract `{0}`")]
    InheritanceCycle(String),
    #[error("no consistent linearization for contract `{0}`")]
    AmbiguousLinearization(String),
    #[error("{line}:{col}: unknown modifier `{name}`")]
    UnknownModifier { name: String, line: u32, col: u32 },
}

impl FrontendError {
    pub fn parse(at: Span, expected: &str, found: &str) -> FrontendError {
        FrontendError::Parse { line: at.line, col: at.col, expected: expected.into(), found: found.into() }
    }

    pub fn unsupported(at: Span, name: &str) -> FrontendError {
        FrontendError::UnsupportedFeature { name: name.into(), line: at.line, col: at.col }
    }

    pub fn type_error(at: Span, message: impl Into<String>) -> FrontendError {
        FrontendError::Type { line: at.line, col: at.col, message: message.into() }
    }
}
