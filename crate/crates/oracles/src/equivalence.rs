//! Translation oracle: random deterministic programs are executed by the
//! source interpreter and, after translation, by the IR interpreter, and the
//! resulting states are compared.

use std::collections::{HashMap, VecDeque};

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solconform::sol::interp::{Interp, Stop, Value};
use solconform::sol::{parse_contract, typecheck, SolType, TypedProgram};
use solconform::verify::{bmc, bmc::BmcResult, VerifyConfig};
use solconform::translate::{assert_label, heap_map, state_map, translate_program, Translation, HARNESS};
use solconform::vir::interp::{IrInterp, IrInterpError, NondetSource, Outcome, Val};

pub const SENDERS: [u64; 3] = [1001, 1002, 1003];

struct Gen {
    rng: ChaCha8Rng,
    budget: usize,
    scopes: Vec<Vec<String>>,
    counters: Vec<String>,
    fresh: usize,
    in_root: bool,
}

impl Gen {
    fn locals(&self) -> Vec<String> {
        self.scopes.iter().flatten().cloned().collect()
    }

    fn int_expr(&mut self, depth: usize) -> String {
        let leaf = depth == 0 || self.rng.gen_bool(0.4);
        if leaf {
            let locals = self.locals();
            return match self.rng.gen_range(0..9) {
                0 | 1 => self.rng.gen_range(-3..7).to_string(),
                2 => "p".into(),
                3 => "q".into(),
                4 => "a".into(),
                5 if self.in_root => "b".into(),
                6 if !locals.is_empty() => locals[self.rng.gen_range(0..locals.len())].clone(),
                7 => "xs.length".into(),
                _ => "p".into(),
            };
        }
        match self.rng.gen_range(0..8) {
            0 => format!("m[{}]", self.int_expr(depth - 1)),
            1 => format!("mm[{}][{}]", self.int_expr(depth - 1), self.int_expr(depth - 1)),
            2 => format!("xs[{}]", self.int_expr(depth - 1)),
            _ => {
                let op = ["+", "-", "*", "/", "%"][self.rng.gen_range(0..5)];
                format!("({} {op} {})", self.int_expr(depth - 1), self.int_expr(depth - 1))
            }
        }
    }

    fn bool_expr(&mut self, depth: usize) -> String {
        if depth == 0 || self.rng.gen_bool(0.5) {
            return match self.rng.gen_range(0..6) {
                0 => "flag".into(),
                1 => "true".into(),
                2 => "msg.sender == owner".into(),
                _ => {
                    let op = ["<", "<=", "==", "!=", ">"][self.rng.gen_range(0..5)];
                    format!("{} {op} {}", self.int_expr(1), self.int_expr(1))
                }
            };
        }
        match self.rng.gen_range(0..3) {
            0 => format!("!({})", self.bool_expr(depth - 1)),
            1 => format!("({} && {})", self.bool_expr(depth - 1), self.bool_expr(depth - 1)),
            _ => format!("({} || {})", self.bool_expr(depth - 1), self.bool_expr(depth - 1)),
        }
    }

    fn block(&mut self, n: usize, depth: usize) -> String {
        self.scopes.push(vec![]);
        let mut out = String::new();
        for _ in 0..n {
            if self.budget == 0 {
                break;
            }
            out.push_str(&self.stmt(depth));
            out.push('\n');
        }
        self.scopes.pop();
        out
    }

    fn fresh(&mut self, p: &str) -> String {
        self.fresh += 1;
        format!("{p}{}", self.fresh)
    }

    fn stmt(&mut self, depth: usize) -> String {
        self.budget -= 1;
        let assignable: Vec<String> = self.locals().into_iter().filter(|l| !self.counters.contains(l)).collect();
        match self.rng.gen_range(0..20) {
            0 => format!("a = {};", self.int_expr(2)),
            1 if self.in_root => format!("b = {};", self.int_expr(2)),
            2 => format!("flag = {};", self.bool_expr(1)),
            3 => format!("m[{}] = {};", self.int_expr(1), self.int_expr(2)),
            4 => format!("mm[{}][{}] = {};", self.int_expr(1), self.int_expr(1), self.int_expr(2)),
            5 => format!("xs.push({});", self.int_expr(2)),
            6 => "if (xs.length > 0) { xs.pop(); }".into(),
            7 => format!("xs[{}] = {};", self.int_expr(1), self.int_expr(1)),
            8 if depth > 0 => {
                let c = self.bool_expr(2);
                let t = self.block(2, depth - 1);
                let e = self.block(1, depth - 1);
                format!("if ({c}) {{\n{t}}} else {{\n{e}}}")
            }
            9 if self.rng.gen_bool(0.3) => format!("require({});", self.bool_expr(1)),
            10 if self.rng.gen_bool(0.3) => format!("assert({});", self.bool_expr(1)),
            11 => format!("hook({});", self.int_expr(1)),
            12 => format!("h.setH({}, {});", self.int_expr(1), self.int_expr(1)),
            13 => {
                let t = self.fresh("t");
                let s = format!("int {t} = h.getH({});", self.int_expr(1));
                self.scopes.last_mut().unwrap().push(t);
                s
            }
            14 => {
                let t = self.fresh("t");
                let s = format!("int {t} = {};", self.int_expr(2));
                self.scopes.last_mut().unwrap().push(t);
                s
            }
            15 if !assignable.is_empty() => {
                let t = assignable[self.rng.gen_range(0..assignable.len())].clone();
                format!("{t} = {};", self.int_expr(2))
            }
            16 if depth > 0 => {
                let i = self.fresh("i");
                let k = self.rng.gen_range(1..4);
                self.scopes.last_mut().unwrap().push(i.clone());
                self.counters.push(i.clone());
                let body = self.block(2, depth - 1);
                format!("int {i} = 0;\nwhile ({i} < {k}) {{\n{body}{i} = {i} + 1;\n}}")
            }
            17 => format!("if (msg.sender == owner) {{ a = a + {}; }}", self.int_expr(1)),
            _ => format!("a = a + {};", self.int_expr(1)),
        }
    }

    fn function(&mut self, name: &str) -> String {
        let n = self.rng.gen_range(2..7);
        let body = self.block(n, 2);
        format!("function {name}(int p, int q) public {{\n{body}}}\n")
    }
}

pub fn random_program(seed: u64) -> String {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), budget: 30, scopes: vec![], counters: vec![], fresh: 0, in_root: false };
    let f1 = g.function("f1");
    let f2 = g.function("f2");
    g.in_root = true;
    let g1 = g.function("g1");
    let hook = if g.rng.gen_bool(0.5) { "function hook(int v) public { b = b - v; }" } else { "" };
    format!(
        "contract Helper {{
  int hv;
  mapping(int => int) hm;
  function setH(int k, int v) public {{ hm[k] = v; hv = hv + v; }}
  function getH(int k) public returns (int) {{ return hm[k] + hv; }}
}}
contract Base {{
  int a;
  bool flag;
  int[] xs;
  mapping(int => int) m;
  mapping(int => mapping(int => int)) mm;
  address owner;
  Helper h;
  constructor() public {{ owner = msg.sender; a = 1; }}
  function hook(int v) public {{ a = a + v; }}
{f1}{f2}}}
contract Root is Base {{
  int b;
  constructor(int init) public {{ b = init; h = new Helper(); }}
  {hook}
{g1}}}
"
    )
}

#[derive(Debug, Clone, PartialEq)]
enum Ending {
    Done,
    Reverted,
    Assert(String),
}

struct Tx {
    sender: u64,
    func: String,
    args: Vec<i64>,
}

fn run_source<'a>(tp: &'a TypedProgram, init: i64, deployer: u64, txs: &[Tx]) -> Option<(Interp<'a>, Ending)> {
    let mut it = Interp::new(tp);
    match it.deploy("Root", Value::Addr(deployer), vec![Value::Int(init.into())]) {
        Ok(_) => {}
        Err(Stop::Revert) => return Some((it, Ending::Reverted)),
        Err(Stop::AssertFailed(s)) => return Some((it, Ending::Assert(assert_label(s)))),
        Err(_) => return None,
    }
    for tx in txs {
        let args = tx.args.iter().map(|a| Value::Int((*a).into())).collect();
        match it.call(1, &tx.func, Value::Addr(tx.sender), args) {
            Ok(_) => {}
            Err(Stop::Revert) => return Some((it, Ending::Reverted)),
            Err(Stop::AssertFailed(s)) => return Some((it, Ending::Assert(assert_label(s)))),
            Err(_) => return None,
        }
    }
    Some((it, Ending::Done))
}

fn tape(t: &Translation, init: i64, deployer: u64, txs: &[Tx]) -> VecDeque<BigInt> {
    let mut v: Vec<i64> = vec![init, deployer as i64];
    for tx in txs {
        let e = t.entries.iter().find(|e| e.function == tx.func).expect("entry");
        v.push(tx.sender as i64);
        v.push(e.choice as i64);
        v.extend(&tx.args);
    }
    v.into_iter().map(BigInt::from).collect()
}

/// Compares source and IR states, matching object addresses to references.
struct Cmp<'a, 'p> {
    tp: &'a TypedProgram,
    t: &'a Translation,
    src: &'a Interp<'a>,
    ir: &'a mut IrInterp<'p>,
    objs: HashMap<u64, u64>,
    pending: Vec<(u64, u64)>,
}

const PROBES: std::ops::RangeInclusive<i64> = -3..=8;

impl Cmp<'_, '_> {
    fn addr(&mut self, s: u64, r: u64) -> Result<(), String> {
        if s == 0 || SENDERS.contains(&s) {
            return if s == r { Ok(()) } else { Err(format!("address {s} vs ref {r}")) };
        }
        match self.objs.get(&s) {
            Some(x) if *x == r => Ok(()),
            Some(x) => Err(format!("object {s} maps to {x}, found {r}")),
            None => {
                if self.objs.values().any(|x| *x == r) {
                    return Err(format!("ref {r} already matched"));
                }
                self.objs.insert(s, r);
                self.pending.push((s, r));
                Ok(())
            }
        }
    }

    /// `s` is the source value (None: an absent nested container).
    fn value(&mut self, ty: &SolType, s: Option<&Value>, ir: &Val) -> Result<(), String> {
        match (ty, s, ir) {
            (SolType::Int, Some(Value::Int(a)), Val::Int(b)) if a == b => Ok(()),
            (SolType::Bool, Some(Value::Bool(a)), Val::Bool(b)) if a == b => Ok(()),
            (SolType::String, Some(Value::Str(a)), Val::Int(b)) if self.t.string_id(a).map(BigInt::from).as_ref() == Some(b) => Ok(()),
            (SolType::Address | SolType::Contract(_), Some(Value::Addr(a)), Val::Ref(b)) => self.addr(*a, *b),
            (SolType::Mapping(..) | SolType::Array(_), _, Val::Ref(r)) => {
                let r = *r;
                let (k, v) = ty.map_parts().unwrap();
                assert_eq!(k, SolType::Int, "probes are integer keys");
                let cont = s.map(|x| match x {
                    Value::Ref(c) => *c,
                    x => panic!("{x:?}"),
                });
                if matches!(ty, SolType::Array(_)) {
                    let sl = cont.map(|c| self.src.containers[c].length.clone()).unwrap_or_default();
                    let il = self.ir.read_global("Length", &[Val::Ref(r)]).unwrap();
                    if il != Val::Int(sl.clone()) {
                        return Err(format!("length {sl} vs {il:?}"));
                    }
                }
                let (map, _) = heap_map(ty).unwrap();
                for key in PROBES {
                    let sv = match cont {
                        Some(c) => match self.src.containers[c].entries.get(&Value::Int(key.into())) {
                            Some(x) => Some(x.clone()),
                            None => self.src.peek(&Value::Ref(c), &Value::Int(key.into())),
                        },
                        None => solconform::sol::interp::zero_scalar(v),
                    };
                    let iv = self.ir.read_global(&map, &[Val::Ref(r), Val::Int(key.into())]).unwrap();
                    self.value(v, sv.as_ref(), &iv).map_err(|e| format!("[{key}] {e}"))?;
                }
                Ok(())
            }
            _ => Err(format!("{ty}: {s:?} vs {ir:?}")),
        }
    }

    fn object(&mut self, s: u64, r: u64) -> Result<(), String> {
        let contract = self.src.object(s).contract.clone();
        for (c, v) in self.tp.all_state_vars(&contract) {
            let sv = self.src.field(s, &v.name);
            let iv = self.ir.read_global(&state_map(&v.name, &c.name), &[Val::Ref(r)]).unwrap();
            self.value(&v.ty, Some(&sv), &iv).map_err(|e| format!("{contract}.{}: {e}", v.name))?;
        }
        Ok(())
    }

    fn run(&mut self, root_ref: u64) -> Result<(), String> {
        self.addr(1, root_ref)?;
        while let Some((s, r)) = self.pending.pop() {
            self.object(s, r)?;
        }
        Ok(())
    }
}

#[derive(Debug, Default)]
pub struct Tally {
    pub runs: usize,
    pub done: usize,
    pub reverted: usize,
    pub asserts: usize,
    pub txs: usize,
}

/// Runs a handful of random transaction sequences against `src` under both
/// semantics and returns how many runs were compared.
pub fn check_program(seed: u64, src: &str, tally: &mut Tally) -> Result<usize, String> {
    let tp = typecheck(&parse_contract(src).map_err(|e| format!("seed {seed}: {e}"))?).map_err(|e| format!("seed {seed}: {e}"))?;
    let t = translate_program(&tp, "Root").map_err(|e| format!("seed {seed}: {e}"))?;
    let funcs: Vec<String> = t.entries.iter().map(|e| e.function.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut checked = 0;
    for _ in 0..6 {
        let init = rng.gen_range(-2..5);
        let deployer = SENDERS[rng.gen_range(0..3)];
        let txs: Vec<Tx> = (0..rng.gen_range(0..6))
            .map(|_| {
                let func = funcs[rng.gen_range(0..funcs.len())].clone();
                let n = if func == "hook" { 1 } else { 2 };
                Tx { sender: SENDERS[rng.gen_range(0..3)], func, args: (0..n).map(|_| rng.gen_range(-2..6)).collect() }
            })
            .collect();
        let Some((src_it, ending)) = run_source(&tp, init, deployer, &txs) else { continue };
        let mut ir = IrInterp::new(&t.program, NondetSource::Sequential(tape(&t, init, deployer, &txs))).with_ref_base(1_000_000);
        let outcome = ir.run(HARNESS, vec![]);
        match (&ending, &outcome) {
            (Ending::Done, Err(IrInterpError::TapeExhausted)) => {}
            (Ending::Reverted, Ok(Outcome::Blocked)) => {}
            (Ending::Assert(l), Ok(Outcome::AssertFailed(m))) if l == m => {}
            _ => return Err(format!("seed {seed}: source ended {ending:?}, IR {outcome:?}")),
        }
        if ending == Ending::Done {
            let root_ref = ir
                .havocs
                .iter()
                .find(|h| h.var == "ret")
                .and_then(|h| h.value.as_ref_id())
                .ok_or_else(|| format!("seed {seed}: no root instance"))?;
            let mut cmp = Cmp { tp: &tp, t: &t, src: &src_it, ir: &mut ir, objs: HashMap::new(), pending: vec![] };
            cmp.run(root_ref).map_err(|e| format!("seed {seed}: state mismatch: {e}"))?;
        }
        checked += 1;
        tally.runs += 1;
        tally.txs += txs.len();
        match ending {
            Ending::Done => tally.done += 1,
            Ending::Reverted => tally.reverted += 1,
            Ending::Assert(_) => tally.asserts += 1,
        }
    }
    Ok(checked)
}

/// Checks programs for `seeds` and returns how many were exercised.
pub fn check_random_programs(seeds: std::ops::Range<u64>, tally: &mut Tally) -> Result<usize, String> {
    let mut programs = 0;
    for seed in seeds {
        if check_program(seed, &random_program(seed), tally)? > 0 {
            programs += 1;
        }
    }
    Ok(programs)
}

/// Three contracts with nested mappings, inheritance and an external call;
/// both assertions hold.
pub const COMPANION: &str = "
contract A {
    mapping (int => int[]) n;
    constructor() {
       n[0].push(22);
    }
    function F() returns (bool) {
        return false;
    }
}
contract B is A {
    mapping (int => int) m;
    constructor()  {
        require (n[0].length == 1);
        m[0] = 11;
        m[1] = 21;
        //m[0] does not alias m[1]
        assert (m[0] == 11);
        //n[0][0] does not alias m[*]
        assert (n[0][0] == 22);
    }
    function F() returns (bool) {
        return true;
    }
}
contract C {
   A a;
   constructor() {
      a = new B();
      assert(a.F());
   }
}
";

/// The companion program deploys in the source semantics, runs to
/// completion in the IR interpreter and has no bounded counterexample, so
/// the solver proves both assertions.
pub fn check_companion(cfg: &VerifyConfig) -> Result<(), String> {
    let tp = typecheck(&parse_contract(COMPANION).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let mut it = Interp::new(&tp);
    it.deploy("C", Value::Addr(SENDERS[0]), vec![]).map_err(|s| format!("source deployment stopped: {s:?}"))?;
    let t = translate_program(&tp, "C").map_err(|e| e.to_string())?;
    let tape = VecDeque::from(vec![BigInt::from(SENDERS[0])]);
    // With no public functions the harness loop idles until the budget ends.
    match IrInterp::new(&t.program, NondetSource::Sequential(tape)).with_budget(10_000).run(HARNESS, vec![]) {
        Ok(Outcome::BudgetExhausted) => {}
        other => return Err(format!("IR deployment ended with {other:?}")),
    }
    for k in 0..=1 {
        match bmc(&tp, &t, k, cfg).map_err(|e| e.to_string())? {
            BmcResult::Safe => {}
            other => return Err(format!("bounded check at k={k}: {other:?}")),
        }
    }
    Ok(())
}
