//! Abstract syntax of the verification IR.

use std::fmt;

use num_bigint::BigInt;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IrType {
    Int,
    Bool,
    Ref,
    Map(Box<IrType>, Box<IrType>),
}

impl IrType {
    pub fn map(k: IrType, v: IrType) -> IrType {
        IrType::Map(Box::new(k), Box::new(v))
    }

    /// Short name used in map identifiers such as `M_int_Ref`.
    pub fn tag(&self) -> String {
        match self {
            IrType::Int => "int".into(),
            IrType::Bool => "bool".into(),
            IrType::Ref => "Ref".into(),
            IrType::Map(k, v) => format!("{}{}", k.tag(), v.tag()),
        }
    }

    /// Key types and final value type of a curried map type.
    pub fn uncurry(&self) -> (Vec<&IrType>, &IrType) {
        let mut keys = vec![];
        let mut t = self;
        while let IrType::Map(k, v) = t {
            keys.push(&**k);
            t = v;
        }
        (keys, t)
    }
}

impl fmt::Display for IrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IrType::Int => write!(f, "int"),
            IrType::Bool => write!(f, "bool"),
            IrType::Ref => write!(f, "Ref"),
            IrType::Map(k, v) => write!(f, "[{k}]{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IrUnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IrBinOp {
    Add,
    Sub,
    Mul,
    /// Euclidean division; division by zero yields zero.
    Div,
    /// Euclidean remainder; modulo zero yields zero.
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    Implies,
}

impl IrBinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            IrBinOp::Add => "+",
            IrBinOp::Sub => "-",
            IrBinOp::Mul => "*",
            IrBinOp::Div => "div",
            IrBinOp::Mod => "mod",
            IrBinOp::Lt => "<",
            IrBinOp::Le => "<=",
            IrBinOp::Gt => ">",
            IrBinOp::Ge => ">=",
            IrBinOp::Eq => "==",
            IrBinOp::Ne => "!=",
            IrBinOp::And => "&&",
            IrBinOp::Or => "||",
            IrBinOp::Implies => "==>",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            IrBinOp::Implies => 1,
            IrBinOp::Or => 2,
            IrBinOp::And => 3,
            IrBinOp::Eq | IrBinOp::Ne => 4,
            IrBinOp::Lt | IrBinOp::Le | IrBinOp::Gt | IrBinOp::Ge => 5,
            IrBinOp::Add | IrBinOp::Sub => 6,
            IrBinOp::Mul | IrBinOp::Div | IrBinOp::Mod => 7,
        }
    }

    pub fn is_boolean(self) -> bool {
        !matches!(self, IrBinOp::Add | IrBinOp::Sub | IrBinOp::Mul | IrBinOp::Div | IrBinOp::Mod)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IrExpr {
    Int(BigInt),
    Bool(bool),
    Null,
    Var(String),
    Unary(IrUnOp, Box<IrExpr>),
    Binary(IrBinOp, Box<IrExpr>, Box<IrExpr>),
    /// Application of an uninterpreted function.
    UF(String, Vec<IrExpr>),
    /// `m[k1][k2]...`; the base is never itself a `Select`.
    Select(Box<IrExpr>, Vec<IrExpr>),
    Forall(Vec<(String, IrType)>, Box<IrExpr>),
}

impl IrExpr {
    pub fn var(n: &str) -> IrExpr {
        IrExpr::Var(n.to_string())
    }

    pub fn int(i: i64) -> IrExpr {
        IrExpr::Int(i.into())
    }

    pub fn select(base: IrExpr, keys: Vec<IrExpr>) -> IrExpr {
        match base {
            IrExpr::Select(b, mut k) => {
                k.extend(keys);
                IrExpr::Select(b, k)
            }
            b => IrExpr::Select(Box::new(b), keys),
        }
    }

    pub fn bin(op: IrBinOp, l: IrExpr, r: IrExpr) -> IrExpr {
        IrExpr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn eq(l: IrExpr, r: IrExpr) -> IrExpr {
        IrExpr::bin(IrBinOp::Eq, l, r)
    }

    pub fn ne(l: IrExpr, r: IrExpr) -> IrExpr {
        IrExpr::bin(IrBinOp::Ne, l, r)
    }

    pub fn and(l: IrExpr, r: IrExpr) -> IrExpr {
        IrExpr::bin(IrBinOp::And, l, r)
    }

    pub fn or(l: IrExpr, r: IrExpr) -> IrExpr {
        IrExpr::bin(IrBinOp::Or, l, r)
    }

    pub fn not(e: IrExpr) -> IrExpr {
        IrExpr::Unary(IrUnOp::Not, Box::new(e))
    }

    pub fn forall(vars: Vec<(String, IrType)>, body: IrExpr) -> IrExpr {
        if vars.is_empty() {
            body
        } else {
            IrExpr::Forall(vars, Box::new(body))
        }
    }

    /// Conjunction of a list; `true` when empty.
    pub fn conj(items: Vec<IrExpr>) -> IrExpr {
        items.into_iter().reduce(IrExpr::and).unwrap_or(IrExpr::Bool(true))
    }

    pub fn walk(&self, f: &mut dyn FnMut(&IrExpr)) {
        f(self);
        match self {
            IrExpr::Unary(_, a) => a.walk(f),
            IrExpr::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            IrExpr::UF(_, args) => args.iter().for_each(|a| a.walk(f)),
            IrExpr::Select(b, ks) => {
                b.walk(f);
                ks.iter().for_each(|k| k.walk(f));
            }
            IrExpr::Forall(_, b) => b.walk(f),
            _ => {}
        }
    }

    /// Rewrites variables bottom-up; bound variables of quantifiers are
    /// left alone.
    pub fn subst(&self, f: &dyn Fn(&str) -> Option<IrExpr>) -> IrExpr {
        self.subst_bound(f, &[])
    }

    fn subst_bound(&self, f: &dyn Fn(&str) -> Option<IrExpr>, bound: &[String]) -> IrExpr {
        match self {
            IrExpr::Var(n) if !bound.contains(n) => f(n).unwrap_or_else(|| self.clone()),
            IrExpr::Unary(op, a) => IrExpr::Unary(*op, Box::new(a.subst_bound(f, bound))),
            IrExpr::Binary(op, a, b) => IrExpr::bin(*op, a.subst_bound(f, bound), b.subst_bound(f, bound)),
            IrExpr::UF(n, args) => IrExpr::UF(n.clone(), args.iter().map(|a| a.subst_bound(f, bound)).collect()),
            IrExpr::Select(b, ks) => IrExpr::select(b.subst_bound(f, bound), ks.iter().map(|k| k.subst_bound(f, bound)).collect()),
            IrExpr::Forall(vs, body) => {
                let mut inner = bound.to_vec();
                inner.extend(vs.iter().map(|(n, _)| n.clone()));
                IrExpr::Forall(vs.clone(), Box::new(body.subst_bound(f, &inner)))
            }
            _ => self.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IrStmt {
    Skip,
    Havoc(String),
    Assign(String, IrExpr),
    /// `map[k1]...[kn] := value`.
    Store { map: String, keys: Vec<IrExpr>, value: IrExpr },
    Assume(IrExpr),
    /// An assertion with a label naming its source position.
    Assert(IrExpr, String),
    Call { proc: String, args: Vec<IrExpr>, rets: Vec<String> },
    Seq(Vec<IrStmt>),
    If(IrExpr, Box<IrStmt>, Box<IrStmt>),
    While(IrExpr, Box<IrStmt>),
}

impl IrStmt {
    /// Sequence with nested sequences flattened and skips removed.
    pub fn seq(items: Vec<IrStmt>) -> IrStmt {
        let mut out = vec![];
        for s in items {
            match s {
                IrStmt::Skip => {}
                IrStmt::Seq(inner) => out.extend(inner),
                s => out.push(s),
            }
        }
        match out.len() {
            0 => IrStmt::Skip,
            1 => out.pop().unwrap(),
            _ => IrStmt::Seq(out),
        }
    }

    /// Rebuilds the tree so that every sequence goes through [`IrStmt::seq`].
    pub fn normalized(&self) -> IrStmt {
        match self {
            IrStmt::Seq(v) => IrStmt::seq(v.iter().map(|s| s.normalized()).collect()),
            IrStmt::If(c, t, e) => IrStmt::if_(c.clone(), t.normalized(), e.normalized()),
            IrStmt::While(c, b) => IrStmt::While(c.clone(), Box::new(b.normalized())),
            s => s.clone(),
        }
    }

    pub fn if_(c: IrExpr, t: IrStmt, e: IrStmt) -> IrStmt {
        IrStmt::If(c, Box::new(t), Box::new(e))
    }

    pub fn call(proc: &str, args: Vec<IrExpr>, rets: Vec<&str>) -> IrStmt {
        IrStmt::Call { proc: proc.into(), args, rets: rets.into_iter().map(String::from).collect() }
    }

    /// Statements of a sequence (a single statement is its own list).
    pub fn items(&self) -> Vec<&IrStmt> {
        match self {
            IrStmt::Seq(v) => v.iter().collect(),
            IrStmt::Skip => vec![],
            s => vec![s],
        }
    }

    pub fn visit(&self, f: &mut dyn FnMut(&IrStmt)) {
        f(self);
        match self {
            IrStmt::Seq(v) => v.iter().for_each(|s| s.visit(f)),
            IrStmt::If(_, t, e) => {
                t.visit(f);
                e.visit(f);
            }
            IrStmt::While(_, b) => b.visit(f),
            _ => {}
        }
    }

    /// Every expression directly contained in this statement tree.
    pub fn visit_exprs(&self, f: &mut dyn FnMut(&IrExpr)) {
        self.visit(&mut |s| match s {
            IrStmt::Assign(_, e) | IrStmt::Assume(e) | IrStmt::Assert(e, _) => f(e),
            IrStmt::Store { keys, value, .. } => {
                keys.iter().for_each(&mut *f);
                f(value);
            }
            IrStmt::Call { args, .. } => args.iter().for_each(&mut *f),
            IrStmt::If(c, _, _) | IrStmt::While(c, _) => f(c),
            _ => {}
        });
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrProcedure {
    pub name: String,
    pub params: Vec<(String, IrType)>,
    pub returns: Vec<(String, IrType)>,
    pub locals: Vec<(String, IrType)>,
    pub body: IrStmt,
}

impl IrProcedure {
    /// Type of a parameter, return or local.
    pub fn var_type(&self, n: &str) -> Option<&IrType> {
        self.params
            .iter()
            .chain(&self.returns)
            .chain(&self.locals)
            .find(|(x, _)| x == n)
            .map(|(_, t)| t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UfDecl {
    pub name: String,
    pub args: Vec<IrType>,
    pub ret: IrType,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IrProgram {
    pub globals: Vec<(String, IrType)>,
    pub ufs: Vec<UfDecl>,
    /// Named integer constants (contract type codes).
    pub consts: Vec<(String, BigInt)>,
    pub axioms: Vec<IrExpr>,
    pub procedures: Vec<IrProcedure>,
}

impl IrProgram {
    pub fn procedure(&self, name: &str) -> Option<&IrProcedure> {
        self.procedures.iter().find(|p| p.name == name)
    }

    pub fn global_type(&self, name: &str) -> Option<&IrType> {
        self.globals.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn const_value(&self, name: &str) -> Option<&BigInt> {
        self.consts.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// Sorts every section by name; the printed form uses this order.
    pub fn normalize(&mut self) {
        self.globals.sort_by(|a, b| a.0.cmp(&b.0));
        self.globals.dedup();
        self.ufs.sort_by(|a, b| a.name.cmp(&b.name));
        self.ufs.dedup();
        self.consts.sort_by(|a, b| a.0.cmp(&b.0));
        self.consts.dedup();
        self.procedures.sort_by(|a, b| a.name.cmp(&b.name));
        for p in &mut self.procedures {
            p.body = p.body.normalized();
        }
    }

    pub fn add_global(&mut self, name: &str, t: IrType) {
        if self.global_type(name).is_none() {
            self.globals.push((name.to_string(), t));
        }
    }
}
