//! Abstract syntax of the Solidity subset.
//!
//! The same tree is used before and after type checking. The checker fills in
//! `Expr::ty`, resolves variable kinds, lowers enums to integers and rewrites
//! statements into the core forms (calls and allocations become statements).

use std::fmt;

use num_bigint::BigInt;

/// Source position. Positions never take part in structural equality, so
/// re-parsed programs compare equal to the originals.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}
impl Eq for Span {}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolType {
    Int,
    Bool,
    String,
    Address,
    /// A contract type. Before type checking this also stands for enum names.
    Contract(String),
    Mapping(Box<SolType>, Box<SolType>),
    /// Dynamic array; treated as a mapping from integers with a length.
    Array(Box<SolType>),
}

impl SolType {
    pub fn is_elementary(&self) -> bool {
        matches!(self, SolType::Int | SolType::Bool | SolType::String | SolType::Address)
    }

    /// Arrays and mappings live on the heap and are handled by reference.
    pub fn is_reference(&self) -> bool {
        matches!(self, SolType::Mapping(..) | SolType::Array(_))
    }

    pub fn is_address_like(&self) -> bool {
        matches!(self, SolType::Address | SolType::Contract(_))
    }

    /// Key and value type when used as a map (arrays are keyed by integers).
    pub fn map_parts(&self) -> Option<(SolType, &SolType)> {
        match self {
            SolType::Mapping(k, v) => Some(((**k).clone(), v)),
            SolType::Array(v) => Some((SolType::Int, v)),
            _ => None,
        }
    }

    /// Number of nested map/array dimensions.
    pub fn dimensions(&self) -> usize {
        match self.map_parts() {
            Some((_, v)) => 1 + v.dimensions(),
            None => 0,
        }
    }
}

impl fmt::Display for SolType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolType::Int => write!(f, "int"),
            SolType::Bool => write!(f, "bool"),
            SolType::String => write!(f, "string"),
            SolType::Address => write!(f, "address"),
            SolType::Contract(c) => write!(f, "{c}"),
            SolType::Mapping(k, v) => write!(f, "mapping({k} => {v})"),
            SolType::Array(t) => write!(f, "{t}[]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
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

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Implies => "==>",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Implies => 1,
            BinOp::Or => 2,
            BinOp::And => 3,
            BinOp::Eq | BinOp::Ne => 4,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 5,
            BinOp::Add | BinOp::Sub => 6,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 7,
        }
    }
}

/// How a name was resolved by the type checker.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VarKind {
    Unresolved,
    Local,
    Param,
    /// A state variable declared in the named contract.
    State(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
    pub ty: Option<SolType>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Int(BigInt),
    Bool(bool),
    Str(String),
    /// The zero address, written `0x0` or `address(0)`.
    Null,
    Var(String, VarKind),
    This,
    MsgSender,
    /// `E.m` for an enum `E`; lowered to its member index by the checker.
    EnumMember(String, String),
    Length(Box<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// A call of the definition-free boolean function `nondet()`.
    Nondet,
    /// Surface-only: a call inside an expression. Hoisted by the checker.
    Call { receiver: Option<Box<Expr>>, name: String, args: Vec<Expr> },
    /// Surface-only: an allocation inside an expression. Hoisted by the checker.
    New(Box<NewKind>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NewKind {
    Contract { name: String, args: Vec<Expr> },
    Array { elem: SolType, size: Expr },
    Mapping(SolType),
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Expr {
        Expr { kind, span, ty: None }
    }

    pub fn typed(kind: ExprKind, ty: SolType) -> Expr {
        Expr { kind, span: Span::default(), ty: Some(ty) }
    }

    pub fn ty(&self) -> &SolType {
        self.ty.as_ref().expect("expression not type checked")
    }

    pub fn boolean(b: bool) -> Expr {
        Expr::typed(ExprKind::Bool(b), SolType::Bool)
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        let ty = match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => SolType::Int,
            _ => SolType::Bool,
        };
        Expr::typed(ExprKind::Binary(op, Box::new(l), Box::new(r)), ty)
    }

    pub fn not(e: Expr) -> Expr {
        Expr::typed(ExprKind::Unary(UnOp::Not, Box::new(e)), SolType::Bool)
    }

    /// Visits this expression and all sub-expressions, parents first.
    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Length(e) | ExprKind::Unary(_, e) => e.walk(f),
            ExprKind::Index(a, b) | ExprKind::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            ExprKind::Call { receiver, args, .. } => {
                if let Some(r) = receiver {
                    r.walk(f);
                }
                args.iter().for_each(|a| a.walk(f));
            }
            ExprKind::New(n) => match &**n {
                NewKind::Contract { args, .. } => args.iter().for_each(|a| a.walk(f)),
                NewKind::Array { size, .. } => size.walk(f),
                NewKind::Mapping(_) => {}
            },
            _ => {}
        }
    }
}

/// Where a local reference-typed variable lives; decides copy vs. alias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataLoc {
    #[default]
    Default,
    Storage,
    Memory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallTarget {
    /// `f(...)`, resolved against the linearization of the current contract.
    Internal,
    /// `e.f(...)`, resolved against the static contract type of `e`.
    External(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    VarDecl { name: String, ty: SolType, loc: DataLoc, enum_name: Option<String>, init: Option<Expr> },
    Assign { lhs: Expr, rhs: Expr },
    /// Surface-only: an expression statement (a call).
    Expr(Expr),
    Push { array: Expr, value: Expr },
    Pop { array: Expr },
    Require(Expr),
    Assert(Expr),
    If { cond: Expr, then_branch: Vec<Stmt>, else_branch: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    Block(Vec<Stmt>),
    /// Surface-only: lowered to an assignment of the return variable.
    Return(Option<Expr>),
    Call { result: Option<Expr>, target: CallTarget, func: String, args: Vec<Expr> },
    NewContract { result: Expr, contract: String, args: Vec<Expr> },
    NewArray { result: Expr, elem: SolType, size: Expr },
    NewMapping { result: Expr, ty: SolType },
}

impl Stmt {
    pub fn new(kind: StmtKind, span: Span) -> Stmt {
        Stmt { kind, span }
    }

    pub fn synth(kind: StmtKind) -> Stmt {
        Stmt { kind, span: Span::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visibility {
    Public,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: SolType,
    pub enum_name: Option<String>,
    pub loc: DataLoc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub params: Vec<Param>,
    /// At most one return value is supported.
    pub returns: Vec<Param>,
    /// `None` for definition-free declarations such as `nondet()`.
    pub body: Option<Vec<Stmt>>,
    pub modifiers: Vec<String>,
    pub visibility: Visibility,
    pub is_constructor: bool,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModifierDef {
    pub name: String,
    pub pre: Vec<Stmt>,
    pub post: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumDef {
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVar {
    pub name: String,
    pub ty: SolType,
    pub enum_name: Option<String>,
    pub init: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contract {
    pub name: String,
    pub bases: Vec<String>,
    pub enums: Vec<EnumDef>,
    pub state_vars: Vec<StateVar>,
    pub constructor: Function,
    pub functions: Vec<Function>,
    pub modifiers: Vec<ModifierDef>,
    pub span: Span,
}

impl Contract {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn state_var(&self, name: &str) -> Option<&StateVar> {
        self.state_vars.iter().find(|v| v.name == name)
    }

    pub fn enum_def(&self, name: &str) -> Option<&EnumDef> {
        self.enums.iter().find(|e| e.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SolProgram {
    pub contracts: Vec<Contract>,
}

impl SolProgram {
    pub fn contract(&self, name: &str) -> Option<&Contract> {
        self.contracts.iter().find(|c| c.name == name)
    }
}

/// Helpers for building statement trees.
pub fn visit_stmts(stmts: &[Stmt], f: &mut dyn FnMut(&Stmt)) {
    for s in stmts {
        f(s);
        match &s.kind {
            StmtKind::If { then_branch, else_branch, .. } => {
                visit_stmts(then_branch, f);
                visit_stmts(else_branch, f);
            }
            StmtKind::While { body, .. } | StmtKind::Block(body) => visit_stmts(body, f),
            _ => {}
        }
    }
}
