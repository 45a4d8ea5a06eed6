//! C3 linearization of contract inheritance.
//!
//! The order lists the contract itself first, then its bases, with earlier
//! entries in an `is` list taking precedence over later ones. Member lookup
//! walks the order and stops at the first match.

use std::collections::{BTreeMap, HashMap};

use super::ast::SolProgram;
use super::FrontendError;

pub fn linearize(p: &SolProgram) -> Result<BTreeMap<String, Vec<String>>, FrontendError> {
    let bases: HashMap<&str, &[String]> = p.contracts.iter().map(|c| (c.name.as_str(), c.bases.as_slice())).collect();
    for c in &p.contracts {
        for b in &c.bases {
            if !bases.contains_key(b.as_str()) {
                return Err(FrontendError::type_error(c.span, format!("unknown base contract `{b}`")));
            }
        }
    }
    let mut done: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut visiting = Vec::new();
    for c in &p.contracts {
        order_of(&c.name, &bases, &mut done, &mut visiting)?;
    }
    Ok(done)
}

fn order_of(
    name: &str,
    bases: &HashMap<&str, &[String]>,
    done: &mut BTreeMap<String, Vec<String>>,
    visiting: &mut Vec<String>,
) -> Result<Vec<String>, FrontendError> {
    if let Some(o) = done.get(name) {
        return Ok(o.clone());
    }
    if visiting.iter().any(|v| v == name) {
        return Err(FrontendError::InheritanceCycle(name.to_string()));
    }
    visiting.push(name.to_string());
    let direct = bases[name];
    let mut seqs: Vec<Vec<String>> = Vec::new();
    for b in direct {
        seqs.push(order_of(b, bases, done, visiting)?);
    }
    seqs.push(direct.to_vec());
    visiting.pop();

    let mut result = vec![name.to_string()];
    loop {
        seqs.retain(|s| !s.is_empty());
        if seqs.is_empty() {
            break;
        }
        // First head that appears in no tail.
        let head = seqs
            .iter()
            .map(|s| &s[0])
            .find(|h| seqs.iter().all(|s| !s[1..].contains(h)))
            .cloned()
            .ok_or_else(|| FrontendError::AmbiguousLinearization(name.to_string()))?;
        for s in seqs.iter_mut() {
            if s[0] == head {
                s.remove(0);
            }
        }
        result.push(head);
    }
    done.insert(name.to_string(), result.clone());
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_contract;
    use super::*;

    fn order(src: &str, c: &str) -> Result<Vec<String>, FrontendError> {
        linearize(&parse_contract(src).unwrap()).map(|m| m[c].clone())
    }

    #[test]
    fn single_base() {
        assert_eq!(order("contract A {} contract B is A {}", "B").unwrap(), vec!["B", "A"]);
    }

    #[test]
    fn no_bases() {
        assert_eq!(order("contract A {}", "A").unwrap(), vec!["A"]);
    }

    #[test]
    fn diamond() {
        let src = "contract A {} contract B is A {} contract C is A {} contract D is B, C {}";
        assert_eq!(order(src, "D").unwrap(), vec!["D", "B", "C", "A"]);
    }

    #[test]
    fn cycle_detected() {
        assert!(matches!(
            order("contract A is B {} contract B is A {}", "A"),
            Err(FrontendError::InheritanceCycle(_))
        ));
    }

    #[test]
    fn inconsistent_precedence_rejected() {
        let src = "contract A {} contract B is A {} contract C is A, B {}";
        assert!(matches!(order(src, "C"), Err(FrontendError::AmbiguousLinearization(_))));
    }

    #[test]
    fn local_precedence_respected() {
        let src = "contract O {} contract A is O {} contract B is O {} contract C is O {}
                   contract K1 is A, B {} contract K2 is B, C {} contract Z is K1, K2 {}";
        let p = parse_contract(src).unwrap();
        let lin = linearize(&p).unwrap();
        for c in &p.contracts {
            let o = &lin[&c.name];
            assert_eq!(o[0], c.name);
            let pos = |n: &String| o.iter().position(|x| x == n).unwrap();
            for w in c.bases.windows(2) {
                assert!(pos(&w[0]) < pos(&w[1]));
            }
        }
        assert_eq!(lin["Z"], vec!["Z", "K1", "A", "K2", "B", "C", "O"]);
    }
}
