//! Pretty-printer producing source that parses back to an equal tree.

use std::fmt::Write;

use super::ast::*;

pub fn print_program(p: &SolProgram) -> String {
    let mut out = String::new();
    for (i, c) in p.contracts.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_contract(&mut out, c);
    }
    out
}

fn print_contract(out: &mut String, c: &Contract) {
    write!(out, "contract {}", c.name).unwrap();
    if !c.bases.is_empty() {
        write!(out, " is {}", c.bases.join(", ")).unwrap();
    }
    out.push_str(" {\n");
    for e in &c.enums {
        writeln!(out, "    enum {} {{ {} }}", e.name, e.members.join(", ")).unwrap();
    }
    for v in &c.state_vars {
        let ty = v.enum_name.clone().unwrap_or_else(|| v.ty.to_string());
        write!(out, "    {} {}", ty, v.name).unwrap();
        if let Some(init) = &v.init {
            write!(out, " = {}", expr(init)).unwrap();
        }
        out.push_str(";\n");
    }
    for m in &c.modifiers {
        writeln!(out, "    modifier {}() {{", m.name).unwrap();
        stmts(out, &m.pre, 2);
        out.push_str("        _;\n");
        stmts(out, &m.post, 2);
        out.push_str("    }\n");
    }
    function(out, &c.constructor);
    for f in &c.functions {
        function(out, f);
    }
    out.push_str("}\n");
}

fn param(p: &Param) -> String {
    let mut s = p.enum_name.clone().unwrap_or_else(|| p.ty.to_string());
    match p.loc {
        DataLoc::Storage => s.push_str(" storage"),
        DataLoc::Memory => s.push_str(" memory"),
        DataLoc::Default => {}
    }
    if !p.name.is_empty() {
        s.push(' ');
        s.push_str(&p.name);
    }
    s
}

fn function(out: &mut String, f: &Function) {
    let params: Vec<String> = f.params.iter().map(param).collect();
    if f.is_constructor {
        write!(out, "    constructor({})", params.join(", ")).unwrap();
    } else {
        write!(out, "    function {}({})", f.name, params.join(", ")).unwrap();
    }
    for m in &f.modifiers {
        write!(out, " {m}()").unwrap();
    }
    out.push_str(match f.visibility {
        Visibility::Public => " public",
        Visibility::Internal => " internal",
    });
    if !f.returns.is_empty() {
        let r: Vec<String> = f.returns.iter().map(param).collect();
        write!(out, " returns ({})", r.join(", ")).unwrap();
    }
    match &f.body {
        None => out.push_str(";\n"),
        Some(body) => {
            out.push_str(" {\n");
            stmts(out, body, 2);
            out.push_str("    }\n");
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn stmts(out: &mut String, ss: &[Stmt], depth: usize) {
    for s in ss {
        stmt(out, s, depth);
    }
}

fn call_args(args: &[Expr]) -> String {
    args.iter().map(expr).collect::<Vec<_>>().join(", ")
}

pub fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::VarDecl { name, ty, loc, enum_name, init } => {
            let p = Param { name: name.clone(), ty: ty.clone(), enum_name: enum_name.clone(), loc: *loc };
            out.push_str(&param(&p));
            if let Some(e) = init {
                write!(out, " = {}", expr(e)).unwrap();
            }
            out.push_str(";\n");
        }
        StmtKind::Assign { lhs, rhs } => writeln!(out, "{} = {};", expr(lhs), expr(rhs)).unwrap(),
        StmtKind::Expr(e) => writeln!(out, "{};", expr(e)).unwrap(),
        StmtKind::Push { array, value } => writeln!(out, "{}.push({});", expr(array), expr(value)).unwrap(),
        StmtKind::Pop { array } => writeln!(out, "{}.pop();", expr(array)).unwrap(),
        StmtKind::Require(e) => writeln!(out, "require({});", expr(e)).unwrap(),
        StmtKind::Assert(e) => writeln!(out, "assert({});", expr(e)).unwrap(),
        StmtKind::If { cond, then_branch, else_branch } => {
            writeln!(out, "if ({}) {{", expr(cond)).unwrap();
            stmts(out, then_branch, depth + 1);
            indent(out, depth);
            if else_branch.is_empty() {
                out.push_str("}\n");
            } else {
                out.push_str("} else {\n");
                stmts(out, else_branch, depth + 1);
                indent(out, depth);
                out.push_str("}\n");
            }
        }
        StmtKind::While { cond, body } => {
            writeln!(out, "while ({}) {{", expr(cond)).unwrap();
            stmts(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Block(body) => {
            out.push_str("{\n");
            stmts(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Return(e) => match e {
            Some(e) => writeln!(out, "return {};", expr(e)).unwrap(),
            None => out.push_str("return;\n"),
        },
        StmtKind::Call { result, target, func, args } => {
            if let Some(r) = result {
                write!(out, "{} = ", expr(r)).unwrap();
            }
            if let CallTarget::External(recv) = target {
                write!(out, "{}.", expr_prec(recv, 9)).unwrap();
            }
            writeln!(out, "{}({});", func, call_args(args)).unwrap();
        }
        StmtKind::NewContract { result, contract, args } => {
            writeln!(out, "{} = new {}({});", expr(result), contract, call_args(args)).unwrap()
        }
        StmtKind::NewArray { result, elem, size } => {
            writeln!(out, "{} = new {}[]({});", expr(result), elem, expr(size)).unwrap()
        }
        StmtKind::NewMapping { result, ty } => writeln!(out, "{} = new {}();", expr(result), ty).unwrap(),
    }
}

pub fn expr(e: &Expr) -> String {
    expr_prec(e, 0)
}

fn quote(s: &str) -> String {
    let mut q = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            '\t' => q.push_str("\\t"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

/// Prints `e`, parenthesizing when its own binding strength is below `ctx`.
fn expr_prec(e: &Expr, ctx: u8) -> String {
    match &e.kind {
        ExprKind::Int(v) => v.to_string(),
        ExprKind::Bool(b) => b.to_string(),
        ExprKind::Str(s) => quote(s),
        ExprKind::Null => "address(0)".into(),
        ExprKind::Var(n, _) => n.clone(),
        ExprKind::This => "this".into(),
        ExprKind::MsgSender => "msg.sender".into(),
        ExprKind::EnumMember(en, m) => format!("{en}.{m}"),
        ExprKind::Length(a) => format!("{}.length", expr_prec(a, 9)),
        ExprKind::Index(a, k) => format!("{}[{}]", expr_prec(a, 9), expr(k)),
        ExprKind::Unary(op, a) => {
            let sym = match op {
                UnOp::Not => "!",
                UnOp::Neg => "-",
            };
            let s = format!("{sym}{}", expr_prec(a, 8));
            if ctx > 8 {
                format!("({s})")
            } else {
                s
            }
        }
        ExprKind::Binary(op, l, r) => {
            let p = op.precedence();
            // Left-assoc operators need a tighter right operand; `==>` the reverse.
            let (lp, rp) = if *op == BinOp::Implies { (p + 1, p) } else { (p, p + 1) };
            let s = format!("{} {} {}", expr_prec(l, lp), op.symbol(), expr_prec(r, rp));
            if p < ctx {
                format!("({s})")
            } else {
                s
            }
        }
        ExprKind::Nondet => "nondet()".into(),
        ExprKind::Call { receiver, name, args } => match receiver {
            Some(r) => format!("{}.{}({})", expr_prec(r, 9), name, call_args(args)),
            None => format!("{}({})", name, call_args(args)),
        },
        ExprKind::New(n) => match &**n {
            NewKind::Contract { name, args } => format!("new {}({})", name, call_args(args)),
            NewKind::Array { elem, size } => format!("new {}[]({})", elem, expr(size)),
            NewKind::Mapping(t) => format!("new {t}()"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_contract;
    use super::*;

    const SAMPLE: &str = r#"
contract A {
    enum E { X, Y }
    mapping(int => int[]) n;
    E st;
    int k = 3;
    modifier m() { int old = k; _; assert(k >= old || !(k == 2)); }
    constructor(int a) m() public { n[0].push(22); st = E.Y; k = (a + 1) * 2 - -a; }
    function F() public returns (bool) { return k % 2 == 0 ==> true; }
    function g(int[] storage xs) internal { xs.pop(); xs.length = 0; }
    function nondet() returns (bool);
}
contract B is A {
    A other;
    function h(string s) public { other = new B(); require(other.F(), "msg"); if (s == "q\"") { k = 1; } else { k = 2; } while (k < 9) { k++; } }
}"#;

    #[test]
    fn print_then_parse_is_identity() {
        let p1 = parse_contract(SAMPLE).unwrap();
        let text = print_program(&p1);
        let p2 = parse_contract(&text).unwrap();
        assert_eq!(p1, p2, "{text}");
        assert_eq!(print_program(&p2), text);
    }

    #[test]
    fn parentheses_follow_precedence() {
        let p = parse_contract("contract A { function f(int a, int b) public { a = (a - b) - (a - b); a = a - (b - a); } }")
            .unwrap();
        let text = print_program(&p);
        assert!(text.contains("a = a - b - (a - b);"), "{text}");
        assert!(text.contains("a = a - (b - a);"), "{text}");
    }
}
