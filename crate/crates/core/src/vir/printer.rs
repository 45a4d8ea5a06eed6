//! Textual `.vir` form of IR programs.

use std::fmt::{self, Write};

use super::ast::*;

impl fmt::Display for IrExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, 0)
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &IrExpr, ctx: u8) -> fmt::Result {
    match e {
        IrExpr::Int(i) => write!(f, "{i}"),
        IrExpr::Bool(b) => write!(f, "{b}"),
        IrExpr::Null => write!(f, "null"),
        IrExpr::Var(n) => write!(f, "{n}"),
        IrExpr::Unary(IrUnOp::Not, a) => {
            write!(f, "!")?;
            write_expr(f, a, 8)
        }
        IrExpr::Unary(IrUnOp::Neg, a) => {
            write!(f, "-(")?;
            write_expr(f, a, 0)?;
            write!(f, ")")
        }
        IrExpr::Binary(op, l, r) => {
            let p = op.precedence();
            let paren = p < ctx;
            if paren {
                write!(f, "(")?;
            }
            let (lp, rp) = if *op == IrBinOp::Implies { (p + 1, p) } else { (p, p + 1) };
            write_expr(f, l, lp)?;
            write!(f, " {} ", op.symbol())?;
            write_expr(f, r, rp)?;
            if paren {
                write!(f, ")")?;
            }
            Ok(())
        }
        IrExpr::UF(n, args) => {
            write!(f, "{n}(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write_expr(f, a, 0)?;
            }
            write!(f, ")")
        }
        IrExpr::Select(b, ks) => {
            if matches!(**b, IrExpr::Var(_)) {
                write_expr(f, b, 9)?;
            } else {
                write!(f, "(")?;
                write_expr(f, b, 0)?;
                write!(f, ")")?;
            }
            for k in ks {
                write!(f, "[")?;
                write_expr(f, k, 0)?;
                write!(f, "]")?;
            }
            Ok(())
        }
        IrExpr::Forall(vs, body) => {
            write!(f, "(forall ")?;
            for (i, (n, t)) in vs.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{n}: {t}")?;
            }
            write!(f, " :: ")?;
            write_expr(f, body, 0)?;
            write!(f, ")")
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn write_block(out: &mut String, s: &IrStmt, indent: usize) {
    for item in s.items() {
        write_stmt(out, item, indent);
    }
}

fn write_stmt(out: &mut String, s: &IrStmt, indent: usize) {
    let pad = "  ".repeat(indent);
    match s {
        IrStmt::Skip => {}
        IrStmt::Havoc(x) => writeln!(out, "{pad}havoc {x};").unwrap(),
        IrStmt::Assign(x, e) => writeln!(out, "{pad}{x} := {e};").unwrap(),
        IrStmt::Store { map, keys, value } => {
            let ks: String = keys.iter().map(|k| format!("[{k}]")).collect();
            writeln!(out, "{pad}{map}{ks} := {value};").unwrap()
        }
        IrStmt::Assume(e) => writeln!(out, "{pad}assume {e};").unwrap(),
        IrStmt::Assert(e, l) => writeln!(out, "{pad}assert {{:msg \"{}\"}} {e};", escape(l)).unwrap(),
        IrStmt::Call { proc, args, rets } => {
            let a: Vec<String> = args.iter().map(|a| a.to_string()).collect();
            if rets.is_empty() {
                writeln!(out, "{pad}call {proc}({});", a.join(", ")).unwrap()
            } else {
                writeln!(out, "{pad}call {} := {proc}({});", rets.join(", "), a.join(", ")).unwrap()
            }
        }
        IrStmt::Seq(v) => v.iter().for_each(|s| write_stmt(out, s, indent)),
        IrStmt::If(..) => {
            out.push_str(&pad);
            write_if(out, s, indent);
            out.push('\n');
        }
        IrStmt::While(c, b) => {
            writeln!(out, "{pad}while ({c}) {{").unwrap();
            write_block(out, b, indent + 1);
            writeln!(out, "{pad}}}").unwrap();
        }
    }
}

fn write_if(out: &mut String, s: &IrStmt, indent: usize) {
    let IrStmt::If(c, t, e) = s else { unreachable!() };
    let pad = "  ".repeat(indent);
    writeln!(out, "if ({c}) {{").unwrap();
    write_block(out, t, indent + 1);
    write!(out, "{pad}}}").unwrap();
    match &**e {
        IrStmt::Skip => {}
        IrStmt::If(..) => {
            out.push_str(" else ");
            write_if(out, e, indent);
        }
        e => {
            out.push_str(" else {\n");
            write_block(out, e, indent + 1);
            write!(out, "{pad}}}").unwrap();
        }
    }
}

fn decls(vs: &[(String, IrType)]) -> String {
    vs.iter().map(|(n, t)| format!("{n}: {t}")).collect::<Vec<_>>().join(", ")
}

pub fn print_procedure(p: &IrProcedure) -> String {
    let mut out = format!("procedure {}({})", p.name, decls(&p.params));
    if !p.returns.is_empty() {
        write!(out, " returns ({})", decls(&p.returns)).unwrap();
    }
    out.push_str("\n{\n");
    for (n, t) in &p.locals {
        writeln!(out, "  var {n}: {t};").unwrap();
    }
    write_block(&mut out, &p.body, 1);
    out.push_str("}\n");
    out
}

pub fn print_program(p: &IrProgram) -> String {
    let mut out = String::new();
    for (n, t) in &p.globals {
        writeln!(out, "var {n}: {t};").unwrap();
    }
    for u in &p.ufs {
        let args: Vec<String> = u.args.iter().map(|t| t.to_string()).collect();
        writeln!(out, "function {}({}): {};", u.name, args.join(", "), u.ret).unwrap();
    }
    for (n, v) in &p.consts {
        writeln!(out, "const {n}: int = {v};").unwrap();
    }
    for a in &p.axioms {
        writeln!(out, "axiom {a};").unwrap();
    }
    for proc in &p.procedures {
        out.push('\n');
        out.push_str(&print_procedure(proc));
    }
    out
}

impl fmt::Display for IrStmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_stmt(&mut s, self, 0);
        f.write_str(s.trim_end())
    }
}

impl fmt::Display for IrProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_program(self))
    }
}
