//! Reference semantics of the checked and desugared subset.
//!
//! This interpreter is an oracle for the translation: it executes the
//! source-level program directly, with unbounded integers, zero-initialized
//! storage, virtual dispatch along the linearization and the same
//! constructor order as the translation (bases first, then scalar zeroing,
//! then array and mapping allocation, then initializers, then the body).
//!
//! Deliberate choices shared with the translation: division and modulo by
//! zero yield 0 and are otherwise Euclidean; reads past an array's length
//! return zero instead of reverting; `pop` on an empty array reverts.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use super::ast::*;
use super::typeck::TypedProgram;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(BigInt),
    Bool(bool),
    Str(String),
    /// Address; 0 is the null address, contract instances are numbered from 1.
    Addr(u64),
    /// Heap array or mapping.
    Ref(usize),
}

impl Value {
    pub fn as_int(&self) -> &BigInt {
        match self {
            Value::Int(i) => i,
            v => panic!("expected integer, found {v:?}"),
        }
    }

    pub fn as_bool(&self) -> bool {
        match self {
            Value::Bool(b) => *b,
            v => panic!("expected bool, found {v:?}"),
        }
    }

    fn as_ref(&self) -> usize {
        match self {
            Value::Ref(r) => *r,
            v => panic!("expected reference, found {v:?}"),
        }
    }
}

/// Why an execution stopped early.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stop {
    /// A `require` failed or a call could not be dispatched.
    Revert,
    AssertFailed(Span),
    BudgetExhausted,
    TapeExhausted,
}

#[derive(Debug, Clone)]
pub struct Container {
    pub value_ty: SolType,
    pub entries: HashMap<Value, Value>,
    pub length: BigInt,
}

#[derive(Debug, Clone)]
pub struct Object {
    pub contract: String,
    pub fields: HashMap<String, Value>,
}

struct Frame {
    this: u64,
    sender: Value,
    locals: HashMap<String, Value>,
}

/// Source-level interpreter state. Objects and containers are never freed.
pub struct Interp<'a> {
    tp: &'a TypedProgram,
    pub objects: Vec<Object>,
    pub containers: Vec<Container>,
    tape: Vec<bool>,
    tape_pos: usize,
    steps: u64,
    budget: u64,
}

type Exec<T> = Result<T, Stop>;

pub fn zero_scalar(t: &SolType) -> Option<Value> {
    match t {
        SolType::Int => Some(Value::Int(BigInt::zero())),
        SolType::Bool => Some(Value::Bool(false)),
        SolType::String => Some(Value::Str(String::new())),
        SolType::Address | SolType::Contract(_) => Some(Value::Addr(0)),
        SolType::Mapping(..) | SolType::Array(_) => None,
    }
}

/// Euclidean division with `x / 0 == 0`.
pub fn div(a: &BigInt, b: &BigInt) -> BigInt {
    if b.is_zero() {
        return BigInt::zero();
    }
    let r = modulo(a, b);
    (a - r) / b
}

/// Euclidean remainder (always non-negative) with `x % 0 == 0`.
pub fn modulo(a: &BigInt, b: &BigInt) -> BigInt {
    if b.is_zero() {
        return BigInt::zero();
    }
    let r = a % b;
    if r.is_negative() {
        r + b.abs()
    } else {
        r
    }
}

impl<'a> Interp<'a> {
    pub fn new(tp: &'a TypedProgram) -> Interp<'a> {
        Interp { tp, objects: vec![], containers: vec![], tape: vec![], tape_pos: 0, steps: 0, budget: 1_000_000 }
    }

    /// Values returned by successive `nondet()` evaluations.
    pub fn with_tape(mut self, tape: Vec<bool>) -> Self {
        self.tape = tape;
        self
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn object(&self, addr: u64) -> &Object {
        &self.objects[addr as usize - 1]
    }

    /// Deploys `contract` as if by `new`, returning its address.
    pub fn deploy(&mut self, contract: &str, sender: Value, args: Vec<Value>) -> Exec<u64> {
        self.new_contract(contract, sender, args)
    }

    /// Calls public function `func` on the object at `addr`.
    pub fn call(&mut self, addr: u64, func: &str, sender: Value, args: Vec<Value>) -> Exec<Option<Value>> {
        self.invoke(addr, func, sender, args)
    }

    /// Reads a state variable of an object.
    pub fn field(&self, addr: u64, name: &str) -> Value {
        self.object(addr).fields[name].clone()
    }

    /// Reads `c[k]` without allocating; absent entries read as their zero.
    pub fn peek(&self, c: &Value, k: &Value) -> Option<Value> {
        let cont = &self.containers[c.as_ref()];
        cont.entries.get(k).cloned().or_else(|| zero_scalar(&cont.value_ty))
    }

    pub fn length(&self, c: &Value) -> BigInt {
        self.containers[c.as_ref()].length.clone()
    }

    fn tick(&mut self) -> Exec<()> {
        self.steps += 1;
        if self.steps > self.budget {
            Err(Stop::BudgetExhausted)
        } else {
            Ok(())
        }
    }

    fn alloc_container(&mut self, t: &SolType) -> Value {
        let (_, v) = t.map_parts().expect("container type");
        self.containers.push(Container { value_ty: v.clone(), entries: HashMap::new(), length: BigInt::zero() });
        Value::Ref(self.containers.len() - 1)
    }

    fn zero(&mut self, t: &SolType) -> Value {
        zero_scalar(t).unwrap_or_else(|| self.alloc_container(t))
    }

    fn new_contract(&mut self, contract: &str, sender: Value, args: Vec<Value>) -> Exec<u64> {
        let tp = self.tp;
        self.objects.push(Object { contract: contract.to_string(), fields: HashMap::new() });
        let addr = self.objects.len() as u64;
        let order = tp.order(contract);
        for base in order.iter().rev() {
            let c = tp.contract(base).expect("contract");
            let mut fr = Frame { this: addr, sender: sender.clone(), locals: HashMap::new() };
            for v in &c.state_vars {
                if let Some(z) = zero_scalar(&v.ty) {
                    self.objects[addr as usize - 1].fields.insert(v.name.clone(), z);
                }
            }
            for v in &c.state_vars {
                if zero_scalar(&v.ty).is_none() {
                    let r = self.alloc_container(&v.ty);
                    self.objects[addr as usize - 1].fields.insert(v.name.clone(), r);
                }
            }
            for v in &c.state_vars {
                if let Some(e) = &v.init {
                    let x = self.eval(&mut fr, e)?;
                    self.objects[addr as usize - 1].fields.insert(v.name.clone(), x);
                }
            }
            let ctor = &c.constructor;
            let a = if base == contract { args.clone() } else { vec![] };
            self.run_function(&mut fr, ctor, a)?;
        }
        Ok(addr)
    }

    fn run_function(&mut self, fr: &mut Frame, f: &Function, args: Vec<Value>) -> Exec<Option<Value>> {
        let body = f.body.as_ref().expect("function body");
        let saved = std::mem::take(&mut fr.locals);
        for (p, a) in f.params.iter().zip(args) {
            fr.locals.insert(p.name.clone(), a);
        }
        for r in &f.returns {
            let z = self.zero(&r.ty);
            fr.locals.insert(r.name.clone(), z);
        }
        let res = self.exec_all(fr, body);
        let ret = f.returns.first().map(|r| fr.locals[&r.name].clone());
        fr.locals = saved;
        res.map(|_| ret)
    }

    fn invoke(&mut self, addr: u64, func: &str, sender: Value, args: Vec<Value>) -> Exec<Option<Value>> {
        if addr == 0 || addr as usize > self.objects.len() {
            return Err(Stop::Revert);
        }
        let tp = self.tp;
        let dynamic = self.object(addr).contract.clone();
        let Some((_, f)) = tp.resolve_function(&dynamic, func) else {
            return Err(Stop::Revert);
        };
        let mut fr = Frame { this: addr, sender, locals: HashMap::new() };
        self.run_function(&mut fr, f, args)
    }

    fn exec_all(&mut self, fr: &mut Frame, ss: &[Stmt]) -> Exec<()> {
        for s in ss {
            self.exec(fr, s)?;
        }
        Ok(())
    }

    fn exec(&mut self, fr: &mut Frame, s: &Stmt) -> Exec<()> {
        self.tick()?;
        match &s.kind {
            StmtKind::VarDecl { name, ty, init, .. } => {
                let v = match init {
                    Some(e) => self.eval(fr, e)?,
                    None => zero_scalar(ty).unwrap_or(Value::Ref(usize::MAX)),
                };
                fr.locals.insert(name.clone(), v);
            }
            StmtKind::Assign { lhs, rhs } => {
                let v = self.eval(fr, rhs)?;
                self.store(fr, lhs, v)?;
            }
            StmtKind::Push { array, value } => {
                let a = self.eval(fr, array)?.as_ref();
                let v = self.eval(fr, value)?;
                let c = &mut self.containers[a];
                let len = c.length.clone();
                c.entries.insert(Value::Int(len.clone()), v);
                c.length = len + 1;
            }
            StmtKind::Pop { array } => {
                let a = self.eval(fr, array)?.as_ref();
                let c = &mut self.containers[a];
                if !c.length.is_positive() {
                    return Err(Stop::Revert);
                }
                c.length -= 1;
                if let Some(z) = zero_scalar(&c.value_ty) {
                    c.entries.insert(Value::Int(c.length.clone()), z);
                }
            }
            StmtKind::Require(e) => {
                if !self.eval(fr, e)?.as_bool() {
                    return Err(Stop::Revert);
                }
            }
            StmtKind::Assert(e) => {
                if !self.eval(fr, e)?.as_bool() {
                    return Err(Stop::AssertFailed(s.span));
                }
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                if self.eval(fr, cond)?.as_bool() {
                    self.exec_all(fr, then_branch)?;
                } else {
                    self.exec_all(fr, else_branch)?;
                }
            }
            StmtKind::While { cond, body } => {
                while self.eval(fr, cond)?.as_bool() {
                    self.tick()?;
                    self.exec_all(fr, body)?;
                }
            }
            StmtKind::Block(b) => self.exec_all(fr, b)?,
            StmtKind::Call { result, target, func, args } => {
                let mut argv = vec![];
                let (addr, sender) = match target {
                    CallTarget::Internal => (fr.this, fr.sender.clone()),
                    CallTarget::External(e) => match self.eval(fr, e)? {
                        Value::Addr(a) => (a, Value::Addr(fr.this)),
                        v => panic!("receiver {v:?}"),
                    },
                };
                for a in args {
                    argv.push(self.eval(fr, a)?);
                }
                let r = self.invoke(addr, func, sender, argv)?;
                if let (Some(lhs), Some(v)) = (result, r) {
                    self.store(fr, lhs, v)?;
                }
            }
            StmtKind::NewContract { result, contract, args } => {
                let mut argv = vec![];
                for a in args {
                    argv.push(self.eval(fr, a)?);
                }
                let addr = self.new_contract(contract, Value::Addr(fr.this), argv)?;
                self.store(fr, result, Value::Addr(addr))?;
            }
            StmtKind::NewArray { result, elem, size } => {
                let n = self.eval(fr, size)?.as_int().clone();
                if n.is_negative() {
                    return Err(Stop::Revert);
                }
                let r = self.alloc_container(&SolType::Array(Box::new(elem.clone())));
                self.containers[r.as_ref()].length = n;
                self.store(fr, result, r)?;
            }
            StmtKind::NewMapping { result, ty } => {
                let r = self.alloc_container(ty);
                self.store(fr, result, r)?;
            }
            StmtKind::Expr(_) | StmtKind::Return(_) => unreachable!("surface statement after type checking"),
        }
        Ok(())
    }

    fn store(&mut self, fr: &mut Frame, lhs: &Expr, v: Value) -> Exec<()> {
        match &lhs.kind {
            ExprKind::Var(n, VarKind::State(_)) => {
                self.objects[fr.this as usize - 1].fields.insert(n.clone(), v);
            }
            ExprKind::Var(n, _) => {
                fr.locals.insert(n.clone(), v);
            }
            ExprKind::Index(a, k) => {
                let a = self.eval(fr, a)?.as_ref();
                let k = self.eval(fr, k)?;
                self.containers[a].entries.insert(k, v);
            }
            ExprKind::Length(a) => {
                let a = self.eval(fr, a)?.as_ref();
                self.containers[a].length = v.as_int().clone();
            }
            _ => unreachable!("not an lvalue"),
        }
        Ok(())
    }

    fn eval(&mut self, fr: &mut Frame, e: &Expr) -> Exec<Value> {
        Ok(match &e.kind {
            ExprKind::Int(i) => Value::Int(i.clone()),
            ExprKind::Bool(b) => Value::Bool(*b),
            ExprKind::Str(s) => Value::Str(s.clone()),
            ExprKind::Null => Value::Addr(0),
            ExprKind::This => Value::Addr(fr.this),
            ExprKind::MsgSender => fr.sender.clone(),
            ExprKind::Var(n, VarKind::State(_)) => self.objects[fr.this as usize - 1].fields[n].clone(),
            ExprKind::Var(n, _) => fr.locals.get(n).cloned().unwrap_or_else(|| panic!("unbound local {n}")),
            ExprKind::EnumMember(en, m) => {
                Value::Int(BigInt::from(self.tp.enum_value(en, m).expect("enum member")))
            }
            ExprKind::Length(a) => {
                let a = self.eval(fr, a)?.as_ref();
                Value::Int(self.containers[a].length.clone())
            }
            ExprKind::Index(a, k) => {
                let a = self.eval(fr, a)?.as_ref();
                let k = self.eval(fr, k)?;
                match self.containers[a].entries.get(&k) {
                    Some(v) => v.clone(),
                    None => {
                        let vt = self.containers[a].value_ty.clone();
                        match zero_scalar(&vt) {
                            Some(z) => z,
                            None => {
                                // Storage semantics: nested containers exist for every key.
                                let r = self.alloc_container(&vt);
                                self.containers[a].entries.insert(k, r.clone());
                                r
                            }
                        }
                    }
                }
            }
            ExprKind::Unary(UnOp::Not, a) => Value::Bool(!self.eval(fr, a)?.as_bool()),
            ExprKind::Unary(UnOp::Neg, a) => Value::Int(-self.eval(fr, a)?.as_int().clone()),
            ExprKind::Binary(op, l, r) => {
                match op {
                    BinOp::And => {
                        return Ok(Value::Bool(self.eval(fr, l)?.as_bool() && self.eval(fr, r)?.as_bool()));
                    }
                    BinOp::Or => {
                        return Ok(Value::Bool(self.eval(fr, l)?.as_bool() || self.eval(fr, r)?.as_bool()));
                    }
                    BinOp::Implies => {
                        return Ok(Value::Bool(!self.eval(fr, l)?.as_bool() || self.eval(fr, r)?.as_bool()));
                    }
                    _ => {}
                }
                let a = self.eval(fr, l)?;
                let b = self.eval(fr, r)?;
                match op {
                    BinOp::Eq => Value::Bool(a == b),
                    BinOp::Ne => Value::Bool(a != b),
                    _ => {
                        let (x, y) = (a.as_int(), b.as_int());
                        match op {
                            BinOp::Add => Value::Int(x + y),
                            BinOp::Sub => Value::Int(x - y),
                            BinOp::Mul => Value::Int(x * y),
                            BinOp::Div => Value::Int(div(x, y)),
                            BinOp::Mod => Value::Int(modulo(x, y)),
                            BinOp::Lt => Value::Bool(x < y),
                            BinOp::Le => Value::Bool(x <= y),
                            BinOp::Gt => Value::Bool(x > y),
                            BinOp::Ge => Value::Bool(x >= y),
                            _ => unreachable!(),
                        }
                    }
                }
            }
            ExprKind::Nondet => {
                let Some(b) = self.tape.get(self.tape_pos).copied() else {
                    return Err(Stop::TapeExhausted);
                };
                self.tape_pos += 1;
                Value::Bool(b)
            }
            ExprKind::Call { .. } | ExprKind::New(_) => unreachable!("surface expression after type checking"),
        })
    }

    /// Snapshot of the elementary state variables of an object.
    pub fn scalar_state(&self, addr: u64) -> BTreeMap<String, Value> {
        self.object(addr)
            .fields
            .iter()
            .filter(|(_, v)| !matches!(v, Value::Ref(_)))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{desugar_modifiers, parse_contract, typecheck};
    use super::*;

    fn program(src: &str) -> TypedProgram {
        desugar_modifiers(&typecheck(&parse_contract(src).unwrap()).unwrap()).unwrap()
    }

    fn int(i: i64) -> Value {
        Value::Int(i.into())
    }

    #[test]
    fn euclidean_division() {
        let b = |i: i64| BigInt::from(i);
        assert_eq!(div(&b(7), &b(2)), b(3));
        assert_eq!(modulo(&b(-7), &b(2)), b(1));
        assert_eq!(div(&b(-7), &b(2)), b(-4));
        assert_eq!(div(&b(-7), &b(-2)), b(4));
        assert_eq!(modulo(&b(-7), &b(-2)), b(1));
        assert_eq!(div(&b(5), &b(0)), b(0));
        assert_eq!(modulo(&b(5), &b(0)), b(0));
    }

    #[test]
    fn nested_mapping_entries_do_not_alias() {
        let tp = program(
            "contract C { mapping(int => mapping(int => int)) m;
               function f() public { m[0][1] = 5; m[1][1] = 6; assert(m[0][1] == 5); } }",
        );
        let mut it = Interp::new(&tp);
        let a = it.deploy("C", Value::Addr(100), vec![]).unwrap();
        it.call(a, "f", Value::Addr(100), vec![]).unwrap();
    }

    #[test]
    fn virtual_dispatch_and_constructor_order() {
        let tp = program(
            "contract A { int x; int y = 3; constructor() public { x = y + 1; } function g() internal returns (int) { return 1; }
                          function f() public { x = g(); } }
             contract B is A { int z; constructor() public { z = x * 10; } function g() internal returns (int) { return 2; } }",
        );
        let mut it = Interp::new(&tp);
        let b = it.deploy("B", Value::Addr(100), vec![]).unwrap();
        assert_eq!(it.field(b, "x"), int(4));
        assert_eq!(it.field(b, "z"), int(40));
        it.call(b, "f", Value::Addr(100), vec![]).unwrap();
        assert_eq!(it.field(b, "x"), int(2));
    }

    #[test]
    fn external_call_changes_sender() {
        let tp = program(
            "contract A { address last; function f() public { last = msg.sender; } }
             contract C { A a; address me; constructor() public { a = new A(); a.f(); me = this; } }",
        );
        let mut it = Interp::new(&tp);
        let c = it.deploy("C", Value::Addr(100), vec![]).unwrap();
        let a = match it.field(c, "a") {
            Value::Addr(a) => a,
            v => panic!("{v:?}"),
        };
        assert_eq!(it.field(a, "last"), Value::Addr(c));
    }

    #[test]
    fn assert_and_require_outcomes() {
        let tp = program("contract A { function f(int x) public { require(x > 0); assert(x > 1); } }");
        let mut it = Interp::new(&tp);
        let a = it.deploy("A", Value::Addr(9), vec![]).unwrap();
        assert_eq!(it.call(a, "f", Value::Addr(9), vec![int(0)]), Err(Stop::Revert));
        assert!(matches!(it.call(a, "f", Value::Addr(9), vec![int(1)]), Err(Stop::AssertFailed(_))));
        assert_eq!(it.call(a, "f", Value::Addr(9), vec![int(2)]), Ok(None));
    }

    #[test]
    fn loops_respect_budget() {
        let tp = program("contract A { function f() public { while (true) { } } }");
        let mut it = Interp::new(&tp).with_budget(1000);
        let a = it.deploy("A", Value::Addr(9), vec![]).unwrap();
        assert_eq!(it.call(a, "f", Value::Addr(9), vec![]), Err(Stop::BudgetExhausted));
    }

    #[test]
    fn arrays_push_pop_length() {
        let tp = program(
            "contract A { int[] xs; int n; function f() public { xs.push(4); xs.push(5); xs.pop(); n = xs.length * 10 + xs[0] + xs[1]; } }",
        );
        let mut it = Interp::new(&tp);
        let a = it.deploy("A", Value::Addr(9), vec![]).unwrap();
        it.call(a, "f", Value::Addr(9), vec![]).unwrap();
        assert_eq!(it.field(a, "n"), int(14));
    }
}
