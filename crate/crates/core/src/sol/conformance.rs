//! Syntactic conformance of a contract to a workflow policy.
//!
//! The contract implementing workflow `w` is the contract named `w`. Its
//! state is held in a state variable named `State` of an enum type whose
//! members are exactly the policy states. Every property, including each
//! instance role, must be a state variable of a compatible type, and every
//! policy function and the constructor must exist with matching arity and
//! parameter types.

use std::collections::BTreeSet;
use std::fmt;

use super::ast::{Function, SolType, Visibility};
use super::typeck::TypedProgram;
use crate::policy::{FunctionSig, ParamType, Policy, Workflow};

/// Name of the state variable that holds the workflow state.
pub const STATE_VAR: &str = "State";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConformanceDiagnostic {
    MissingContract(String),
    MissingStateVar { contract: String },
    StateVarNotEnum { contract: String },
    StateSetMismatch { contract: String, expected: Vec<String>, found: Vec<String> },
    MissingProperty { contract: String, property: String },
    PropertyTypeMismatch { contract: String, property: String, expected: String, found: String },
    InstanceRoleNotAddress { contract: String, property: String },
    MissingFunction(String),
    NotPublic(String),
    ArityMismatch { function: String, expected: usize, found: usize },
    ParamTypeMismatch { function: String, param: String, expected: String, found: String },
}

impl fmt::Display for ConformanceDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ConformanceDiagnostic::*;
        match self {
            MissingContract(w) => write!(f, "no contract named `{w}` implements the workflow"),
            MissingStateVar { contract } => write!(f, "contract `{contract}` has no `{STATE_VAR}` variable"),
            StateVarNotEnum { contract } => write!(f, "`{contract}.{STATE_VAR}` is not of an enum type"),
            StateSetMismatch { contract, expected, found } => write!(
                f,
                "`{contract}.{STATE_VAR}` ranges over {{{}}} but the policy states are {{{}}}",
                found.join(", "),
                expected.join(", ")
            ),
            MissingProperty { contract, property } => write!(f, "contract `{contract}` lacks property `{property}`"),
            PropertyTypeMismatch { contract, property, expected, found } => {
                write!(f, "`{contract}.{property}` has type {found}, policy expects {expected}")
            }
            InstanceRoleNotAddress { contract, property } => {
                write!(f, "instance role `{contract}.{property}` must be an address")
            }
            MissingFunction(g) => write!(f, "missing function `{g}`"),
            NotPublic(g) => write!(f, "function `{g}` must be public"),
            ArityMismatch { function, expected, found } => {
                write!(f, "`{function}` takes {found} parameters, policy expects {expected}")
            }
            ParamTypeMismatch { function, param, expected, found } => {
                write!(f, "parameter `{param}` of `{function}` has type {found}, policy expects {expected}")
            }
        }
    }
}

/// Whether a Solidity type can carry a policy type.
pub fn compatible(pt: &ParamType, st: &SolType) -> bool {
    match pt {
        ParamType::Int => *st == SolType::Int,
        ParamType::String => *st == SolType::String,
        ParamType::Bool => *st == SolType::Bool,
        ParamType::Address | ParamType::Role(_) => st.is_address_like(),
    }
}

fn type_name(pt: &ParamType) -> String {
    match pt {
        ParamType::Role(r) => format!("address ({r})"),
        ParamType::Int => "int".into(),
        ParamType::String => "string".into(),
        ParamType::Address => "address".into(),
        ParamType::Bool => "bool".into(),
    }
}

pub fn check_syntactic_conformance(p: &TypedProgram, pol: &Policy) -> Vec<ConformanceDiagnostic> {
    let mut out = vec![];
    for w in &pol.workflows {
        check_workflow(p, w, &mut out);
    }
    out
}

fn check_workflow(p: &TypedProgram, w: &Workflow, out: &mut Vec<ConformanceDiagnostic>) {
    use ConformanceDiagnostic::*;
    let cname = w.name.clone();
    if p.contract(&cname).is_none() {
        out.push(MissingContract(cname));
        return;
    }

    match p.resolve_state_var(&cname, STATE_VAR) {
        None => out.push(MissingStateVar { contract: cname.clone() }),
        Some((_, v)) => match v.enum_name.as_ref().and_then(|e| p.enum_def(e)) {
            None => out.push(StateVarNotEnum { contract: cname.clone() }),
            Some(e) => {
                let found: BTreeSet<&String> = e.members.iter().collect();
                let expected: BTreeSet<&String> = w.states.iter().collect();
                if found != expected {
                    out.push(StateSetMismatch {
                        contract: cname.clone(),
                        expected: w.states.clone(),
                        found: e.members.clone(),
                    });
                }
            }
        },
    }

    for prop in &w.properties {
        if prop.name == STATE_VAR {
            continue;
        }
        match p.resolve_state_var(&cname, &prop.name) {
            None => out.push(MissingProperty { contract: cname.clone(), property: prop.name.clone() }),
            Some((_, v)) => {
                if matches!(prop.ty, ParamType::Role(_)) && !v.ty.is_address_like() {
                    out.push(InstanceRoleNotAddress { contract: cname.clone(), property: prop.name.clone() });
                } else if !compatible(&prop.ty, &v.ty) {
                    out.push(PropertyTypeMismatch {
                        contract: cname.clone(),
                        property: prop.name.clone(),
                        expected: type_name(&prop.ty),
                        found: v.ty.to_string(),
                    });
                }
            }
        }
    }

    let ctor = &p.contract(&cname).unwrap().constructor;
    check_signature(&w.constructor, "constructor", ctor, out);
    for sig in &w.functions {
        match p.resolve_function(&cname, &sig.name) {
            None => out.push(MissingFunction(sig.name.clone())),
            Some((_, f)) => {
                if f.visibility != Visibility::Public || f.body.is_none() {
                    out.push(NotPublic(sig.name.clone()));
                }
                check_signature(sig, &sig.name, f, out);
            }
        }
    }
}

fn check_signature(sig: &FunctionSig, name: &str, f: &Function, out: &mut Vec<ConformanceDiagnostic>) {
    if sig.params.len() != f.params.len() {
        out.push(ConformanceDiagnostic::ArityMismatch {
            function: name.to_string(),
            expected: sig.params.len(),
            found: f.params.len(),
        });
        return;
    }
    for (sp, fp) in sig.params.iter().zip(&f.params) {
        if !compatible(&sp.ty, &fp.ty) {
            out.push(ConformanceDiagnostic::ParamTypeMismatch {
                function: name.to_string(),
                param: fp.name.clone(),
                expected: type_name(&sp.ty),
                found: fp.ty.to_string(),
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::tests::HELLO;
    use super::super::{parse_contract, typecheck};
    use super::*;
    use crate::policy::parse_policy;

    pub const HELLO_POLICY: &str = r#"{
      "ApplicationName": "HelloBlockchain",
      "ApplicationRoles": [ { "Name": "Requestor" }, { "Name": "Responder" } ],
      "Workflows": [ {
        "Name": "HelloBlockchain",
        "Initiators": [ "Requestor" ],
        "StartState": "Request",
        "States": [ "Request", "Respond" ],
        "Properties": [
          { "Name": "State", "Type": "int" },
          { "Name": "Requestor", "Type": "Requestor" },
          { "Name": "Responder", "Type": "Responder" },
          { "Name": "RequestMessage", "Type": "string" },
          { "Name": "ResponseMessage", "Type": "string" } ],
        "Constructor": { "Parameters": [ { "Name": "message", "Type": "string" } ] },
        "Functions": [
          { "Name": "SendRequest", "Parameters": [ { "Name": "requestMessage", "Type": "string" } ] },
          { "Name": "SendResponse", "Parameters": [ { "Name": "responseMessage", "Type": "string" } ] } ],
        "Transitions": [
          { "StartState": "Request", "Function": "SendResponse", "AllowedRoles": [ "Responder" ],
            "AllowedInstanceRoles": [], "NextStates": [ "Respond" ] },
          { "StartState": "Respond", "Function": "SendRequest", "AllowedRoles": [],
            "AllowedInstanceRoles": [ "Requestor" ], "NextStates": [ "Request" ] } ] } ] }"#;

    fn diags(src: &str) -> Vec<ConformanceDiagnostic> {
        let tp = typecheck(&parse_contract(src).unwrap()).unwrap();
        check_syntactic_conformance(&tp, &parse_policy(HELLO_POLICY).unwrap())
    }

    #[test]
    fn hello_blockchain_conforms() {
        assert_eq!(diags(HELLO), vec![]);
    }

    #[test]
    fn missing_function_reported() {
        let start = HELLO.find("function SendResponse").unwrap();
        let end = start + HELLO[start..].find("\n    }").unwrap() + 6;
        let src = format!("{}{}", &HELLO[..start], &HELLO[end..]);
        assert_eq!(diags(&src), vec![ConformanceDiagnostic::MissingFunction("SendResponse".into())]);
    }

    #[test]
    fn extra_enum_member_is_state_set_mismatch() {
        let src = HELLO.replace("enum StateType { Request, Respond }", "enum StateType { Request, Respond, Extra }");
        assert_ne!(src, HELLO);
        let d = diags(&src);
        assert_eq!(d.len(), 1);
        assert!(matches!(d[0], ConformanceDiagnostic::StateSetMismatch { .. }));
    }

    #[test]
    fn missing_contract_reported() {
        assert_eq!(
            diags("contract Other { }"),
            vec![ConformanceDiagnostic::MissingContract("HelloBlockchain".into())]
        );
    }

    #[test]
    fn role_property_must_be_address() {
        let tp = typecheck(&parse_contract(HELLO).unwrap()).unwrap();
        let pol = HELLO_POLICY.replace(
            r#"{ "Name": "RequestMessage", "Type": "string" }"#,
            r#"{ "Name": "RequestMessage", "Type": "Requestor" }"#,
        );
        let d = check_syntactic_conformance(&tp, &parse_policy(&pol).unwrap());
        assert_eq!(
            d,
            vec![ConformanceDiagnostic::InstanceRoleNotAddress {
                contract: "HelloBlockchain".into(),
                property: "RequestMessage".into()
            }]
        );
    }
}
