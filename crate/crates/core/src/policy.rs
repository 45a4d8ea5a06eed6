//! Workbench-style application policies.
//!
//! A policy is a set of global roles plus one or more workflows. Each workflow
//! is a finite state machine whose transitions are guarded by access sets made
//! of global roles and instance roles (address-valued properties).
//!
//! The JSON dialect accepted here carries exactly that tuple; unknown extra
//! fields are ignored so that richer Workbench documents still load.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A parsed application policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub name: String,
    pub roles: Vec<String>,
    pub workflows: Vec<Workflow>,
}

/// One state machine of a policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workflow {
    pub name: String,
    pub states: Vec<String>,
    pub initial_state: String,
    pub properties: Vec<Param>,
    pub constructor: FunctionSig,
    pub functions: Vec<FunctionSig>,
    pub initiators: Vec<String>,
    pub transitions: Vec<Transition>,
}

/// Types that may appear in properties and parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamType {
    Int,
    String,
    Address,
    Bool,
    /// An address that designates a member of the named role.
    Role(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: ParamType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSig {
    pub name: String,
    pub params: Vec<Param>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub start: String,
    pub function: String,
    pub access: AccessSet,
    pub successors: Vec<String>,
}

/// Who may fire a transition: members of global roles or holders of
/// instance-role properties.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccessSet {
    pub global_roles: BTreeSet<String>,
    pub instance_roles: BTreeSet<String>,
}

impl AccessSet {
    pub fn is_empty(&self) -> bool {
        self.global_roles.is_empty() && self.instance_roles.is_empty()
    }
}

impl Workflow {
    /// Properties whose type is a role: the workflow's instance roles, in
    /// declaration order, as `(property, role)` pairs.
    pub fn instance_roles(&self) -> Vec<(&str, &str)> {
        self.properties
            .iter()
            .filter_map(|p| match &p.ty {
                ParamType::Role(r) => Some((p.name.as_str(), r.as_str())),
                _ => None,
            })
            .collect()
    }

    pub fn function(&self, name: &str) -> Option<&FunctionSig> {
        self.functions.iter().find(|f| f.name == name)
    }
}

impl ParamType {
    fn parse(s: &str) -> ParamType {
        match s {
            "int" | "uint" => ParamType::Int,
            "string" => ParamType::String,
            "address" => ParamType::Address,
            "bool" => ParamType::Bool,
            other => ParamType::Role(other.to_string()),
        }
    }

    fn render(&self) -> &str {
        match self {
            ParamType::Int => "int",
            ParamType::String => "string",
            ParamType::Address => "address",
            ParamType::Bool => "bool",
            ParamType::Role(r) => r,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("schema error at {path}: {reason}")]
    Schema { path: String, reason: String },
    #[error("duplicate {kind} name `{name}`")]
    DuplicateName { kind: String, name: String },
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
}

/// A violated policy invariant together with the JSON path where it occurs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyDiagnostic {
    EmptyName { location: String },
    DuplicateName { kind: &'static str, name: String, location: String },
    InitialStateUnknown { location: String, state: String },
    UnknownRole { location: String, role: String },
    UnknownState { location: String, state: String },
    UnknownFunction { location: String, function: String },
    UnknownAccessEntry { location: String, entry: String },
    EmptySuccessors { location: String },
}

impl PolicyDiagnostic {
    pub fn location(&self) -> &str {
        match self {
            PolicyDiagnostic::EmptyName { location }
            | PolicyDiagnostic::DuplicateName { location, .. }
            | PolicyDiagnostic::InitialStateUnknown { location, .. }
            | PolicyDiagnostic::UnknownRole { location, .. }
            | PolicyDiagnostic::UnknownState { location, .. }
            | PolicyDiagnostic::UnknownFunction { location, .. }
            | PolicyDiagnostic::UnknownAccessEntry { location, .. }
            | PolicyDiagnostic::EmptySuccessors { location } => location,
        }
    }
}

impl fmt::Display for PolicyDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyDiagnostic::EmptyName { location } => write!(f, "{location}: empty name"),
            PolicyDiagnostic::DuplicateName { kind, name, location } => {
                write!(f, "{location}: duplicate {kind} name `{name}`")
            }
            PolicyDiagnostic::InitialStateUnknown { location, state } => {
                write!(f, "{location}: initial state `{state}` is not a declared state")
            }
            PolicyDiagnostic::UnknownRole { location, role } => {
                write!(f, "{location}: unknown role `{role}`")
            }
            PolicyDiagnostic::UnknownState { location, state } => {
                write!(f, "{location}: unknown state `{state}`")
            }
            PolicyDiagnostic::UnknownFunction { location, function } => {
                write!(f, "{location}: unknown function `{function}`")
            }
            PolicyDiagnostic::UnknownAccessEntry { location, entry } => {
                write!(f, "{location}: access entry `{entry}` is neither a role nor an instance role")
            }
            PolicyDiagnostic::EmptySuccessors { location } => {
                write!(f, "{location}: transition has no successor states")
            }
        }
    }
}

// ---- wire format ----

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct PolicyDoc {
    application_name: String,
    application_roles: Vec<NamedDoc>,
    workflows: Vec<WorkflowDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct NamedDoc {
    name: String,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct TypedDoc {
    name: String,
    #[serde(rename = "Type")]
    ty: String,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct CtorDoc {
    parameters: Vec<TypedDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct FunctionDoc {
    name: String,
    parameters: Vec<TypedDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct TransitionDoc {
    start_state: String,
    function: String,
    allowed_roles: Vec<String>,
    allowed_instance_roles: Vec<String>,
    next_states: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct WorkflowDoc {
    name: String,
    initiators: Vec<String>,
    start_state: String,
    states: Vec<String>,
    properties: Vec<TypedDoc>,
    constructor: CtorDoc,
    functions: Vec<FunctionDoc>,
    transitions: Vec<TransitionDoc>,
}

fn params_from(docs: Vec<TypedDoc>) -> Vec<Param> {
    docs.into_iter().map(|d| Param { ty: ParamType::parse(&d.ty), name: d.name }).collect()
}

fn params_to(params: &[Param]) -> Vec<TypedDoc> {
    params.iter().map(|p| TypedDoc { name: p.name.clone(), ty: p.ty.render().to_string() }).collect()
}

/// Parses and validates a policy document.
pub fn parse_policy(text: &str) -> Result<Policy, PolicyError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: PolicyDoc = serde_path_to_error::deserialize(de).map_err(|e| PolicyError::Schema {
        path: e.path().to_string(),
        reason: e.inner().to_string(),
    })?;
    let policy = Policy {
        name: doc.application_name,
        roles: doc.application_roles.into_iter().map(|r| r.name).collect(),
        workflows: doc
            .workflows
            .into_iter()
            .map(|w| Workflow {
                constructor: FunctionSig { name: w.name.clone(), params: params_from(w.constructor.parameters) },
                name: w.name,
                states: w.states,
                initial_state: w.start_state,
                properties: params_from(w.properties),
                functions: w
                    .functions
                    .into_iter()
                    .map(|f| FunctionSig { name: f.name, params: params_from(f.parameters) })
                    .collect(),
                initiators: w.initiators,
                transitions: w
                    .transitions
                    .into_iter()
                    .map(|t| Transition {
                        start: t.start_state,
                        function: t.function,
                        access: AccessSet {
                            global_roles: t.allowed_roles.into_iter().collect(),
                            instance_roles: t.allowed_instance_roles.into_iter().collect(),
                        },
                        successors: t.next_states,
                    })
                    .collect(),
            })
            .collect(),
    };
    if let Some(d) = validate_policy(&policy).into_iter().next() {
        return Err(match d {
            PolicyDiagnostic::DuplicateName { kind, name, .. } => {
                PolicyError::DuplicateName { kind: kind.to_string(), name }
            }
            other => PolicyError::Schema { path: other.location().to_string(), reason: other.to_string() },
        });
    }
    Ok(policy)
}

/// Renders a policy back to the JSON dialect accepted by [`parse_policy`].
pub fn serialize_policy(p: &Policy) -> String {
    let doc = PolicyDoc {
        application_name: p.name.clone(),
        application_roles: p.roles.iter().map(|r| NamedDoc { name: r.clone() }).collect(),
        workflows: p
            .workflows
            .iter()
            .map(|w| WorkflowDoc {
                name: w.name.clone(),
                initiators: w.initiators.clone(),
                start_state: w.initial_state.clone(),
                states: w.states.clone(),
                properties: params_to(&w.properties),
                constructor: CtorDoc { parameters: params_to(&w.constructor.params) },
                functions: w
                    .functions
                    .iter()
                    .map(|f| FunctionDoc { name: f.name.clone(), parameters: params_to(&f.params) })
                    .collect(),
                transitions: w
                    .transitions
                    .iter()
                    .map(|t| TransitionDoc {
                        start_state: t.start.clone(),
                        function: t.function.clone(),
                        allowed_roles: t.access.global_roles.iter().cloned().collect(),
                        allowed_instance_roles: t.access.instance_roles.iter().cloned().collect(),
                        next_states: t.successors.clone(),
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("policy documents always serialize")
}

fn check_unique<'a>(
    names: impl IntoIterator<Item = &'a str>,
    kind: &'static str,
    location: &str,
    out: &mut Vec<PolicyDiagnostic>,
) {
    let mut seen = BTreeSet::new();
    for (i, n) in names.into_iter().enumerate() {
        if n.is_empty() {
            out.push(PolicyDiagnostic::EmptyName { location: format!("{location}[{i}]") });
        } else if !seen.insert(n) {
            out.push(PolicyDiagnostic::DuplicateName {
                kind,
                name: n.to_string(),
                location: format!("{location}[{i}]"),
            });
        }
    }
}

/// Checks every structural invariant of a policy. An empty result means the
/// policy is well formed.
pub fn validate_policy(p: &Policy) -> Vec<PolicyDiagnostic> {
    let mut out = Vec::new();
    check_unique(p.roles.iter().map(String::as_str), "role", "ApplicationRoles", &mut out);
    check_unique(p.workflows.iter().map(|w| w.name.as_str()), "workflow", "Workflows", &mut out);
    let roles: BTreeSet<&str> = p.roles.iter().map(String::as_str).collect();

    for (wi, w) in p.workflows.iter().enumerate() {
        let at = format!("Workflows[{wi}]");
        check_unique(w.states.iter().map(String::as_str), "state", &format!("{at}.States"), &mut out);
        check_unique(
            w.properties.iter().map(|x| x.name.as_str()),
            "property",
            &format!("{at}.Properties"),
            &mut out,
        );
        check_unique(
            w.functions.iter().map(|f| f.name.as_str()),
            "function",
            &format!("{at}.Functions"),
            &mut out,
        );
        let states: BTreeSet<&str> = w.states.iter().map(String::as_str).collect();
        if !states.contains(w.initial_state.as_str()) {
            out.push(PolicyDiagnostic::InitialStateUnknown {
                location: format!("{at}.StartState"),
                state: w.initial_state.clone(),
            });
        }
        for (i, r) in w.initiators.iter().enumerate() {
            if !roles.contains(r.as_str()) {
                out.push(PolicyDiagnostic::UnknownRole { location: format!("{at}.Initiators[{i}]"), role: r.clone() });
            }
        }
        let check_params = |params: &[Param], loc: String, out: &mut Vec<PolicyDiagnostic>| {
            check_unique(params.iter().map(|x| x.name.as_str()), "parameter", &loc, out);
            for (i, prm) in params.iter().enumerate() {
                if let ParamType::Role(r) = &prm.ty {
                    if !roles.contains(r.as_str()) {
                        out.push(PolicyDiagnostic::UnknownRole { location: format!("{loc}[{i}].Type"), role: r.clone() });
                    }
                }
            }
        };
        check_params(&w.properties, format!("{at}.Properties"), &mut out);
        check_params(&w.constructor.params, format!("{at}.Constructor.Parameters"), &mut out);
        for (fi, f) in w.functions.iter().enumerate() {
            check_params(&f.params, format!("{at}.Functions[{fi}].Parameters"), &mut out);
        }
        let instance: BTreeSet<&str> = w.instance_roles().into_iter().map(|(n, _)| n).collect();
        for (ti, t) in w.transitions.iter().enumerate() {
            let tat = format!("{at}.Transitions[{ti}]");
            if !states.contains(t.start.as_str()) {
                out.push(PolicyDiagnostic::UnknownState { location: format!("{tat}.StartState"), state: t.start.clone() });
            }
            if w.function(&t.function).is_none() {
                out.push(PolicyDiagnostic::UnknownFunction {
                    location: format!("{tat}.Function"),
                    function: t.function.clone(),
                });
            }
            for r in &t.access.global_roles {
                if !roles.contains(r.as_str()) {
                    out.push(PolicyDiagnostic::UnknownAccessEntry {
                        location: format!("{tat}.AllowedRoles"),
                        entry: r.clone(),
                    });
                }
            }
            for r in &t.access.instance_roles {
                if !instance.contains(r.as_str()) {
                    out.push(PolicyDiagnostic::UnknownAccessEntry {
                        location: format!("{tat}.AllowedInstanceRoles"),
                        entry: r.clone(),
                    });
                }
            }
            if t.successors.is_empty() {
                out.push(PolicyDiagnostic::EmptySuccessors { location: format!("{tat}.NextStates") });
            }
            for (si, s) in t.successors.iter().enumerate() {
                if !states.contains(s.as_str()) {
                    out.push(PolicyDiagnostic::UnknownState {
                        location: format!("{tat}.NextStates[{si}]"),
                        state: s.clone(),
                    });
                }
            }
        }
    }
    out
}

/// The transitions of `w` fired by function `g`, in document order.
pub fn transitions_for_function<'a>(w: &'a Workflow, g: &str) -> Result<Vec<&'a Transition>, PolicyError> {
    if w.function(g).is_none() {
        return Err(PolicyError::UnknownFunction(g.to_string()));
    }
    Ok(w.transitions.iter().filter(|t| t.function == g).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HELLO: &str = r#"{
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

    fn hello() -> Policy {
        parse_policy(HELLO).unwrap()
    }

    #[test]
    fn hello_blockchain_parses() {
        let p = hello();
        assert_eq!(p.roles.len(), 2);
        assert_eq!(p.workflows[0].states.len(), 2);
        assert_eq!(p.workflows[0].transitions.len(), 2);
        assert_eq!(p.workflows[0].instance_roles(), vec![("Requestor", "Requestor"), ("Responder", "Responder")]);
        assert!(validate_policy(&p).is_empty());
    }

    #[test]
    fn degenerate_policy_is_valid() {
        let text = r#"{"ApplicationName":"A","ApplicationRoles":[{"Name":"R"}],"Workflows":[{"Name":"A",
          "Initiators":["R"],"StartState":"S","States":["S"],"Properties":[],"Constructor":{"Parameters":[]},
          "Functions":[],"Transitions":[]}]}"#;
        let p = parse_policy(text).unwrap();
        assert!(p.workflows[0].transitions.is_empty());
    }

    #[test]
    fn undeclared_state_is_schema_error() {
        let text = HELLO.replace(r#""NextStates": [ "Respond" ]"#, r#""NextStates": [ "X" ]"#);
        match parse_policy(&text) {
            Err(PolicyError::Schema { path, .. }) => assert!(path.contains("NextStates"), "{path}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn missing_field_is_schema_error_with_path() {
        let text = HELLO.replace(r#""StartState": "Request","#, "");
        match parse_policy(&text) {
            Err(PolicyError::Schema { path, reason }) => {
                assert!(path.starts_with("Workflows[0]"), "{path}");
                assert!(reason.contains("StartState"), "{reason}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_role_rejected() {
        let text = HELLO.replace(r#"{ "Name": "Responder" } ]"#, r#"{ "Name": "Requestor" } ]"#);
        assert!(matches!(parse_policy(&text), Err(PolicyError::DuplicateName { .. })));
    }

    #[test]
    fn empty_successors_rejected() {
        let text = HELLO.replace(r#""NextStates": [ "Respond" ]"#, r#""NextStates": []"#);
        assert!(matches!(parse_policy(&text), Err(PolicyError::Schema { .. })));
    }

    #[test]
    fn initial_state_unknown_diagnostic() {
        let mut p = hello();
        p.workflows[0].initial_state = "Nope".into();
        let d = validate_policy(&p);
        assert_eq!(d.len(), 1);
        assert!(matches!(d[0], PolicyDiagnostic::InitialStateUnknown { .. }));
    }

    #[test]
    fn unknown_instance_role_diagnostic() {
        let mut p = hello();
        p.workflows[0].transitions[1].access.instance_roles.insert("Ghost".into());
        let d = validate_policy(&p);
        assert_eq!(d.len(), 1);
        assert!(matches!(d[0], PolicyDiagnostic::UnknownAccessEntry { .. }));
    }

    #[test]
    fn transitions_for_send_response() {
        let p = hello();
        let w = &p.workflows[0];
        let ts = transitions_for_function(w, "SendResponse").unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].start, "Request");
        assert_eq!(ts[0].access.global_roles.iter().collect::<Vec<_>>(), vec!["Responder"]);
        assert_eq!(ts[0].successors, vec!["Respond"]);
        assert!(matches!(transitions_for_function(w, "Nope"), Err(PolicyError::UnknownFunction(_))));
    }

    #[test]
    fn function_without_transitions_and_order_preserved() {
        let mut p = hello();
        let w = &mut p.workflows[0];
        w.functions.push(FunctionSig { name: "Idle".into(), params: vec![] });
        let mut t = w.transitions[0].clone();
        t.start = "Respond".into();
        w.transitions.push(t);
        assert!(transitions_for_function(w, "Idle").unwrap().is_empty());
        // Filter oracle: same elements, same order.
        let expected: Vec<&Transition> = w.transitions.iter().filter(|t| t.function == "SendResponse").collect();
        let got = transitions_for_function(w, "SendResponse").unwrap();
        assert_eq!(got, expected);
        assert_eq!(got.iter().map(|t| t.start.as_str()).collect::<Vec<_>>(), vec!["Request", "Respond"]);
    }

    fn arb_policy() -> impl Strategy<Value = Policy> {
        (1usize..4, 1usize..5, 0usize..4, proptest::collection::vec((0usize..8, 0usize..8, 0usize..8, any::<bool>()), 0..8))
            .prop_map(|(nroles, nstates, nfuns, ts)| {
                let roles: Vec<String> = (0..nroles).map(|i| format!("R{i}")).collect();
                let states: Vec<String> = (0..nstates).map(|i| format!("S{i}")).collect();
                let functions: Vec<FunctionSig> = (0..nfuns)
                    .map(|i| FunctionSig {
                        name: format!("f{i}"),
                        params: vec![Param { name: "a".into(), ty: ParamType::Int }],
                    })
                    .collect();
                let properties = vec![Param { name: "Owner".into(), ty: ParamType::Role(roles[0].clone()) }];
                let transitions = if functions.is_empty() {
                    vec![]
                } else {
                    ts.into_iter()
                        .map(|(s, f, d, inst)| {
                            let mut access = AccessSet::default();
                            if inst {
                                access.instance_roles.insert("Owner".into());
                            } else {
                                access.global_roles.insert(roles[s % nroles].clone());
                            }
                            Transition {
                                start: states[s % nstates].clone(),
                                function: functions[f % nfuns].name.clone(),
                                access,
                                successors: vec![states[d % nstates].clone()],
                            }
                        })
                        .collect()
                };
                Policy {
                    name: "App".into(),
                    workflows: vec![Workflow {
                        name: "App".into(),
                        initial_state: states[0].clone(),
                        states,
                        properties,
                        constructor: FunctionSig { name: "App".into(), params: vec![] },
                        functions,
                        initiators: vec![roles[0].clone()],
                        transitions,
                    }],
                    roles,
                }
            })
    }

    proptest! {
        #[test]
        fn serialize_round_trips(p in arb_policy()) {
            prop_assert!(validate_policy(&p).is_empty());
            prop_assert_eq!(parse_policy(&serialize_policy(&p)).unwrap(), p);
        }

        #[test]
        fn transitions_partition_by_function(p in arb_policy()) {
            let w = &p.workflows[0];
            let mut total = 0;
            for f in &w.functions {
                let ts = transitions_for_function(w, &f.name).unwrap();
                prop_assert!(ts.iter().all(|t| t.function == f.name));
                total += ts.len();
            }
            prop_assert_eq!(total, w.transitions.len());
        }
    }
}
