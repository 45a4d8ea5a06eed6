//! Inlines modifiers into the functions that apply them.
//!
//! A modifier `m() { pre; _; post }` applied to `f` turns the body of `f`
//! into `pre; body; post`. With several modifiers the first listed is the
//! outermost. Modifier locals that clash with names already used by the
//! function are renamed apart.

use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::typeck::TypedProgram;
use super::FrontendError;

pub fn desugar_modifiers(p: &TypedProgram) -> Result<TypedProgram, FrontendError> {
    let mut out = p.clone();
    for ci in 0..out.program.contracts.len() {
        let cname = out.program.contracts[ci].name.clone();
        let mut ctor = out.program.contracts[ci].constructor.clone();
        inline_into(p, &cname, &mut ctor)?;
        out.program.contracts[ci].constructor = ctor;
        for fi in 0..out.program.contracts[ci].functions.len() {
            let mut f = out.program.contracts[ci].functions[fi].clone();
            inline_into(p, &cname, &mut f)?;
            out.program.contracts[ci].functions[fi] = f;
        }
    }
    Ok(out)
}

fn resolve_modifier<'a>(p: &'a TypedProgram, contract: &str, name: &str) -> Option<&'a ModifierDef> {
    p.order(contract)
        .iter()
        .find_map(|c| p.contract(c).and_then(|c| c.modifiers.iter().find(|m| m.name == name)))
}

fn inline_into(p: &TypedProgram, contract: &str, f: &mut Function) -> Result<(), FrontendError> {
    if f.modifiers.is_empty() {
        return Ok(());
    }
    let Some(body) = f.body.take() else {
        return Err(FrontendError::type_error(f.span, "modifier applied to a function without a body"));
    };
    let mut used: HashSet<String> = f.params.iter().chain(f.returns.iter()).map(|x| x.name.clone()).collect();
    used.extend(declared_names(&body));

    let mut pres = vec![];
    let mut posts = vec![];
    for mname in &f.modifiers {
        let Some(m) = resolve_modifier(p, contract, mname) else {
            return Err(FrontendError::UnknownModifier { name: mname.clone(), line: f.span.line, col: f.span.col });
        };
        let mut renames = HashMap::new();
        let mut mine: Vec<String> = declared_names(&m.pre);
        mine.extend(declared_names(&m.post));
        for n in mine {
            if used.contains(&n) {
                let mut i = 1;
                let mut fresh = format!("{n}_{i}");
                while used.contains(&fresh) {
                    i += 1;
                    fresh = format!("{n}_{i}");
                }
                used.insert(fresh.clone());
                renames.insert(n, fresh);
            } else {
                used.insert(n);
            }
        }
        let mut pre = m.pre.clone();
        let mut post = m.post.clone();
        rename_stmts(&mut pre, &renames);
        rename_stmts(&mut post, &renames);
        pres.push(pre);
        posts.push(post);
    }
    let mut new_body: Vec<Stmt> = pres.into_iter().flatten().collect();
    new_body.extend(body);
    for post in posts.into_iter().rev() {
        new_body.extend(post);
    }
    f.body = Some(new_body);
    f.modifiers.clear();
    Ok(())
}

fn declared_names(ss: &[Stmt]) -> Vec<String> {
    let mut out = vec![];
    visit_stmts(ss, &mut |s| {
        if let StmtKind::VarDecl { name, .. } = &s.kind {
            out.push(name.clone());
        }
    });
    out
}

fn rename_expr(e: &mut Expr, m: &HashMap<String, String>) {
    match &mut e.kind {
        ExprKind::Var(n, VarKind::Local) => {
            if let Some(r) = m.get(n) {
                *n = r.clone();
            }
        }
        ExprKind::Length(a) | ExprKind::Unary(_, a) => rename_expr(a, m),
        ExprKind::Index(a, b) | ExprKind::Binary(_, a, b) => {
            rename_expr(a, m);
            rename_expr(b, m);
        }
        _ => {}
    }
}

fn rename_stmts(ss: &mut [Stmt], m: &HashMap<String, String>) {
    if m.is_empty() {
        return;
    }
    for s in ss {
        match &mut s.kind {
            StmtKind::VarDecl { name, init, .. } => {
                if let Some(r) = m.get(name) {
                    *name = r.clone();
                }
                if let Some(e) = init {
                    rename_expr(e, m);
                }
            }
            StmtKind::Assign { lhs, rhs } => {
                rename_expr(lhs, m);
                rename_expr(rhs, m);
            }
            StmtKind::Expr(e) | StmtKind::Require(e) | StmtKind::Assert(e) | StmtKind::Pop { array: e } => rename_expr(e, m),
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    rename_expr(e, m);
                }
            }
            StmtKind::Push { array, value } => {
                rename_expr(array, m);
                rename_expr(value, m);
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                rename_expr(cond, m);
                rename_stmts(then_branch, m);
                rename_stmts(else_branch, m);
            }
            StmtKind::While { cond, body } => {
                rename_expr(cond, m);
                rename_stmts(body, m);
            }
            StmtKind::Block(b) => rename_stmts(b, m),
            StmtKind::Call { result, target, args, .. } => {
                if let Some(r) = result {
                    rename_expr(r, m);
                }
                if let CallTarget::External(e) = target {
                    rename_expr(e, m);
                }
                args.iter_mut().for_each(|a| rename_expr(a, m));
            }
            StmtKind::NewContract { result, args, .. } => {
                rename_expr(result, m);
                args.iter_mut().for_each(|a| rename_expr(a, m));
            }
            StmtKind::NewArray { result, size, .. } => {
                rename_expr(result, m);
                rename_expr(size, m);
            }
            StmtKind::NewMapping { result, .. } => rename_expr(result, m),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_contract, typecheck};
    use super::*;

    fn desugar(src: &str) -> Result<TypedProgram, FrontendError> {
        desugar_modifiers(&typecheck(&parse_contract(src).unwrap()).unwrap())
    }

    fn body(tp: &TypedProgram, f: &str) -> Vec<Stmt> {
        tp.program.contracts[0].function(f).unwrap().body.clone().unwrap()
    }

    fn is_assign_to(s: &Stmt, v: i64) -> bool {
        matches!(&s.kind, StmtKind::Assign { rhs, .. } if rhs.kind == ExprKind::Int(v.into()))
    }

    #[test]
    fn single_modifier_wraps_body() {
        let tp = desugar("contract A { int x; modifier Foo() { x = 1; _; x = 3; } function Bar() Foo() public { x = 2; } }").unwrap();
        let b = body(&tp, "Bar");
        assert_eq!(b.len(), 3);
        assert!(is_assign_to(&b[0], 1) && is_assign_to(&b[1], 2) && is_assign_to(&b[2], 3));
        assert!(tp.program.contracts[0].function("Bar").unwrap().modifiers.is_empty());
    }

    #[test]
    fn no_modifiers_is_identity() {
        let src = "contract A { int x; function Bar() public { x = 2; } }";
        let tp = typecheck(&parse_contract(src).unwrap()).unwrap();
        assert_eq!(desugar_modifiers(&tp).unwrap(), tp);
    }

    #[test]
    fn modifiers_nest_first_outermost() {
        let tp = desugar(
            "contract A { int x;
               modifier M1() { x = 1; _; x = 5; }
               modifier M2() { x = 2; _; x = 4; }
               function f() M1() M2() public { x = 3; } }",
        )
        .unwrap();
        let b = body(&tp, "f");
        for (i, s) in b.iter().enumerate() {
            assert!(is_assign_to(s, i as i64 + 1), "{i}: {s:?}");
        }
    }

    #[test]
    fn clashing_modifier_locals_renamed() {
        let tp = desugar(
            "contract A { int x;
               modifier M() { int old = x; _; assert(x >= old); }
               function f() M() public { int old = 7; x = old; } }",
        )
        .unwrap();
        let names = declared_names(&body(&tp, "f"));
        assert_eq!(names, vec!["old_1", "old"]);
        let b = body(&tp, "f");
        let StmtKind::Assert(e) = &b.last().unwrap().kind else { panic!() };
        let ExprKind::Binary(_, _, r) = &e.kind else { panic!() };
        assert!(matches!(&r.kind, ExprKind::Var(n, _) if n == "old_1"));
    }

    #[test]
    fn unknown_modifier_reported() {
        let r = desugar("contract A { function f() Nope() public { } }");
        assert!(matches!(r, Err(FrontendError::UnknownModifier { ref name, .. }) if name == "Nope"), "{r:?}");
    }

    #[test]
    fn inherited_modifier_resolves() {
        let tp = desugar("contract A { int x; modifier M() { x = 1; _; } } contract B is A { function f() M() public { x = 2; } }").unwrap();
        let b = tp.program.contracts[1].function("f").unwrap().body.clone().unwrap();
        assert_eq!(b.len(), 2);
    }
}
