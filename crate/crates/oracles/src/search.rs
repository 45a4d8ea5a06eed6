//! Exhaustive oracles that share no code with the symbolic engine beyond
//! the source interpreter and single inductiveness queries.

use solconform::instrument::{conditions, count_nondet, implied_for_all_nondet, make_runtime_checks};
use solconform::sol::interp::{Interp, Stop, Value};
use solconform::sol::{desugar_modifiers, SolType, TypedProgram};
use solconform::translate::{public_functions, Translation};
use solconform::verify::{is_inductive, CandidatePredicate, VerifyConfig};

/// Sender of every transaction in the exhaustive search.
const SENDER: u64 = 0x1001;

type Call = (String, Vec<Value>);

fn choices(types: &[SolType], domain: &[i64]) -> Result<Vec<Vec<Value>>, String> {
    let mut out = vec![vec![]];
    for ty in types {
        let vals: Vec<Value> = match ty {
            SolType::Int => domain.iter().map(|v| Value::Int((*v).into())).collect(),
            SolType::Bool => vec![Value::Bool(false), Value::Bool(true)],
            other => return Err(format!("no finite domain for {other}")),
        };
        out = out.iter().flat_map(|p| vals.iter().map(move |v| [p.clone(), vec![v.clone()]].concat())).collect();
    }
    Ok(out)
}

enum Run {
    Ok,
    Revert,
    Failed,
}

fn replay(tp: &TypedProgram, root: &str, ctor: &[Value], calls: &[Call]) -> Result<Run, String> {
    let mut it = Interp::new(tp);
    let classify = |r: Result<(), Stop>| match r {
        Ok(()) => Ok(Run::Ok),
        Err(Stop::Revert) => Ok(Run::Revert),
        Err(Stop::AssertFailed(_)) => Ok(Run::Failed),
        Err(other) => Err(format!("interpreter stopped with {other:?}")),
    };
    let addr = match it.deploy(root, Value::Addr(SENDER), ctor.to_vec()) {
        Ok(a) => a,
        Err(e) => return classify(Err(e)),
    };
    for (i, (f, args)) in calls.iter().enumerate() {
        match classify(it.call(addr, f, Value::Addr(SENDER), args.clone()).map(|_| ()))? {
            Run::Ok => {}
            r if i + 1 == calls.len() => return Ok(r),
            _ => return Err("replay of a successful prefix failed".into()),
        }
    }
    Ok(Run::Ok)
}

/// Breadth-first search over all transaction sequences whose arguments are
/// drawn from `domain`. Returns the smallest number of calls after the
/// deployment that fails an assertion, or `None` if no sequence of at most
/// `max_calls` calls does. Reverted transactions end a branch, as in the
/// bounded checker.
pub fn shortest_failure(tp: &TypedProgram, root: &str, max_calls: usize, domain: &[i64]) -> Result<Option<usize>, String> {
    let tp = &desugar_modifiers(tp).map_err(|e| e.to_string())?;
    let ctor_types: Vec<SolType> =
        tp.contract(root).ok_or("unknown root")?.constructor.params.iter().map(|p| p.ty.clone()).collect();
    let mut funcs: Vec<Call> = vec![];
    for (_, f) in public_functions(tp, root) {
        let types: Vec<SolType> = f.params.iter().map(|p| p.ty.clone()).collect();
        funcs.extend(choices(&types, domain)?.into_iter().map(|a| (f.name.clone(), a)));
    }
    let mut frontier: Vec<(Vec<Value>, Vec<Call>)> = vec![];
    for ctor in choices(&ctor_types, domain)? {
        match replay(tp, root, &ctor, &[])? {
            Run::Failed => return Ok(Some(0)),
            Run::Ok => frontier.push((ctor, vec![])),
            Run::Revert => {}
        }
    }
    for depth in 1..=max_calls {
        let mut next = vec![];
        for (ctor, seq) in &frontier {
            for call in &funcs {
                let mut s = seq.clone();
                s.push(call.clone());
                match replay(tp, root, ctor, &s)? {
                    Run::Failed => return Ok(Some(depth)),
                    Run::Ok => next.push((ctor.clone(), s)),
                    Run::Revert => {}
                }
            }
        }
        frontier = next;
    }
    Ok(None)
}

/// The largest subset of `cands` that is established by the constructor and
/// preserved by every public function, found by checking every subset. The
/// inductive subsets are closed under union, so the answer is unique; this
/// is checked rather than assumed.
pub fn greatest_inductive_subset(t: &Translation, cands: &[CandidatePredicate], cfg: &VerifyConfig) -> Result<Vec<usize>, String> {
    let n = cands.len();
    if n > 12 {
        return Err(format!("{n} candidates are too many to enumerate"));
    }
    let masks: Vec<u32> = (0..1u32 << n).collect();
    let workers = std::thread::available_parallelism().map_or(4, |p| p.get()).min(8);
    let chunk = masks.len().div_ceil(workers);
    let results: Vec<Result<Vec<u32>, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = masks
            .chunks(chunk)
            .map(|ms| {
                s.spawn(move || {
                    let mut ok = vec![];
                    for &m in ms {
                        let set: Vec<usize> = (0..n).filter(|i| m >> i & 1 == 1).collect();
                        if is_inductive(t, cands, &set, cfg).map_err(|e| e.to_string())? {
                            ok.push(m);
                        }
                    }
                    Ok(ok)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut inductive = vec![];
    for r in results {
        inductive.extend(r?);
    }
    let best = *inductive.iter().max_by_key(|m| m.count_ones()).ok_or("not even the empty set is inductive")?;
    let union = inductive.iter().fold(0, |a, m| a | m);
    if union != best {
        return Err(format!("inductive subsets are not closed under union: best {best:#b}, union {union:#b}"));
    }
    Ok((0..n).filter(|i| best >> i & 1 == 1).collect())
}

/// Summary of the runtime-check comparison for one program.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RuntimeCheckStats {
    pub checks: usize,
    /// Largest number of `nondet()` atoms in one original condition.
    pub max_atoms: usize,
}

/// Every runtime check must be free of `nondet()` and implied by its
/// original condition under every valuation of the `nondet()` atoms.
pub fn check_runtime_checks(p: &TypedProgram, max_atoms: usize) -> Result<RuntimeCheckStats, String> {
    let orig = conditions(p);
    let rt = conditions(&make_runtime_checks(p));
    if orig.len() != rt.len() {
        return Err(format!("{} conditions became {}", orig.len(), rt.len()));
    }
    let mut stats = RuntimeCheckStats { checks: rt.len(), max_atoms: 0 };
    for (o, r) in orig.iter().zip(&rt) {
        let atoms = count_nondet(o);
        stats.max_atoms = stats.max_atoms.max(atoms);
        if atoms > max_atoms {
            return Err(format!("{atoms} nondet atoms exceed the enumeration limit"));
        }
        if count_nondet(r) != 0 {
            return Err("a runtime check still calls nondet()".into());
        }
        if !implied_for_all_nondet(o, r) {
            return Err("a runtime check is not implied by its original".into());
        }
    }
    Ok(stats)
}
