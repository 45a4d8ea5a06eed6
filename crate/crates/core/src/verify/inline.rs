//! Call inlining, loop elimination and harness unrolling.
//!
//! The result of inlining contains no calls other than the allocation
//! intrinsics `New` and `NewUnbounded`, and no loops.

use crate::vir::prelude::{ALLOC, NEW, NEW_UNBOUNDED};
use crate::vir::{IrExpr, IrProcedure, IrProgram, IrStmt, IrType};

use super::VerifyError;

/// How loops inside procedure bodies are eliminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopMode {
    /// Unroll `n` times, then `assume !guard`. Under-approximates.
    Unroll(usize),
    /// Havoc everything the loop modifies and check one arbitrary
    /// iteration. Over-approximates.
    Cut,
}

fn zero_of(t: &IrType) -> Option<IrExpr> {
    match t {
        IrType::Int => Some(IrExpr::int(0)),
        IrType::Bool => Some(IrExpr::Bool(false)),
        IrType::Ref => Some(IrExpr::Null),
        IrType::Map(..) => None,
    }
}

fn rename_expr(e: &IrExpr, f: &dyn Fn(&str) -> Option<String>) -> IrExpr {
    e.subst(&|n| f(n).map(|x| IrExpr::var(&x)))
}

/// Renames free variables of `s` with `f` (unmapped names are kept).
pub fn rename_stmt(s: &IrStmt, f: &dyn Fn(&str) -> Option<String>) -> IrStmt {
    let r = |n: &str| f(n).unwrap_or_else(|| n.to_string());
    match s {
        IrStmt::Skip => IrStmt::Skip,
        IrStmt::Havoc(x) => IrStmt::Havoc(r(x)),
        IrStmt::Assign(x, e) => IrStmt::Assign(r(x), rename_expr(e, f)),
        IrStmt::Store { map, keys, value } => IrStmt::Store {
            map: r(map),
            keys: keys.iter().map(|k| rename_expr(k, f)).collect(),
            value: rename_expr(value, f),
        },
        IrStmt::Assume(e) => IrStmt::Assume(rename_expr(e, f)),
        IrStmt::Assert(e, l) => IrStmt::Assert(rename_expr(e, f), l.clone()),
        IrStmt::Call { proc, args, rets } => IrStmt::Call {
            proc: proc.clone(),
            args: args.iter().map(|a| rename_expr(a, f)).collect(),
            rets: rets.iter().map(|x| r(x)).collect(),
        },
        IrStmt::Seq(v) => IrStmt::Seq(v.iter().map(|x| rename_stmt(x, f)).collect()),
        IrStmt::If(c, t, e) => IrStmt::If(rename_expr(c, f), Box::new(rename_stmt(t, f)), Box::new(rename_stmt(e, f))),
        IrStmt::While(c, b) => IrStmt::While(rename_expr(c, f), Box::new(rename_stmt(b, f))),
    }
}

/// Variables a call-free statement may write.
pub fn modified(s: &IrStmt) -> Vec<String> {
    let mut out: Vec<String> = vec![];
    s.visit(&mut |x| {
        let mut add = |n: &str| {
            if !out.iter().any(|o| o == n) {
                out.push(n.to_string());
            }
        };
        match x {
            IrStmt::Havoc(n) | IrStmt::Assign(n, _) => add(n),
            IrStmt::Store { map, .. } => add(map),
            IrStmt::Call { proc, rets, .. } => {
                for r in rets {
                    add(r);
                }
                if proc == NEW || proc == NEW_UNBOUNDED {
                    add(ALLOC);
                }
            }
            _ => {}
        }
    });
    out
}

pub struct Inliner<'p> {
    prog: &'p IrProgram,
    mode: LoopMode,
    max_depth: usize,
    counter: usize,
    /// Locals introduced by inlining.
    pub locals: Vec<(String, IrType)>,
}

impl<'p> Inliner<'p> {
    pub fn new(prog: &'p IrProgram, mode: LoopMode, max_depth: usize) -> Self {
        Inliner { prog, mode, max_depth, counter: 0, locals: vec![] }
    }

    pub fn inline(&mut self, s: &IrStmt, depth: usize) -> Result<IrStmt, VerifyError> {
        Ok(match s {
            IrStmt::Call { proc, .. } if proc == NEW || proc == NEW_UNBOUNDED => s.clone(),
            IrStmt::Call { proc, args, rets } => {
                if depth >= self.max_depth {
                    return Err(VerifyError::RecursionDepthExceeded(self.max_depth));
                }
                let p = self.prog.procedure(proc).ok_or_else(|| VerifyError::UnknownProcedure(proc.clone()))?;
                self.counter += 1;
                let n = self.counter;
                let own: Vec<&(String, IrType)> = p.params.iter().chain(&p.returns).chain(&p.locals).collect();
                let fresh = |x: &str| format!("{x}__{n}");
                for (x, t) in &own {
                    self.locals.push((fresh(x), t.clone()));
                }
                let mut out = vec![];
                for ((x, _), a) in p.params.iter().zip(args) {
                    out.push(IrStmt::Assign(fresh(x), a.clone()));
                }
                for (x, t) in p.returns.iter().chain(&p.locals) {
                    if let Some(z) = zero_of(t) {
                        out.push(IrStmt::Assign(fresh(x), z));
                    }
                }
                let names: Vec<&str> = own.iter().map(|(x, _)| x.as_str()).collect();
                let body = rename_stmt(&p.body, &|x| names.contains(&x).then(|| fresh(x)));
                out.push(self.inline(&body, depth + 1)?);
                for (r, (x, _)) in rets.iter().zip(&p.returns) {
                    out.push(IrStmt::Assign(r.clone(), IrExpr::var(&fresh(x))));
                }
                IrStmt::seq(out)
            }
            IrStmt::Seq(v) => IrStmt::seq(v.iter().map(|x| self.inline(x, depth)).collect::<Result<_, _>>()?),
            IrStmt::If(c, t, e) => IrStmt::if_(c.clone(), self.inline(t, depth)?, self.inline(e, depth)?),
            IrStmt::While(c, b) => {
                let b = self.inline(b, depth)?;
                match self.mode {
                    LoopMode::Unroll(k) => unroll_loop(c, &b, k),
                    LoopMode::Cut => {
                        let mut out: Vec<IrStmt> = modified(&b).into_iter().map(IrStmt::Havoc).collect();
                        out.push(IrStmt::if_(c.clone(), IrStmt::seq(vec![b, IrStmt::Assume(IrExpr::Bool(false))]), IrStmt::Skip));
                        IrStmt::seq(out)
                    }
                }
            }
            _ => s.clone(),
        })
    }
}

fn unroll_loop(c: &IrExpr, b: &IrStmt, k: usize) -> IrStmt {
    if k == 0 {
        return IrStmt::Assume(IrExpr::not(c.clone()));
    }
    IrStmt::if_(c.clone(), IrStmt::seq(vec![b.clone(), unroll_loop(c, b, k - 1)]), IrStmt::Skip)
}

/// Replaces the harness's top-level `while (true)` by `k` copies of its
/// body.
pub fn unroll_harness(main: &IrProcedure, k: usize) -> IrProcedure {
    let items = main
        .body
        .items()
        .into_iter()
        .flat_map(|s| match s {
            IrStmt::While(IrExpr::Bool(true), round) => vec![(**round).clone(); k],
            s => vec![s.clone()],
        })
        .collect();
    IrProcedure { body: IrStmt::seq(items), ..main.clone() }
}

/// Inlines every call in `proc`'s body. Locals created by inlining are
/// appended to the procedure's locals.
pub fn inline_procedure(prog: &IrProgram, proc: &IrProcedure, mode: LoopMode, max_depth: usize) -> Result<IrProcedure, VerifyError> {
    let mut inl = Inliner::new(prog, mode, max_depth);
    let body = inl.inline(&proc.body, 0)?;
    let mut locals = proc.locals.clone();
    locals.extend(inl.locals);
    Ok(IrProcedure { name: proc.name.clone(), params: proc.params.clone(), returns: proc.returns.clone(), locals, body })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vir::{parse_program, print_procedure};

    const SRC: &str = "
var g: [Ref]int;
procedure Inc(this: Ref, d: int) returns (r: int)
{
  var t: int;
  t := g[this] + d;
  g[this] := t;
  r := t;
}
procedure Loop(this: Ref)
{
  var i: int;
  while (i < 3) {
    call i := Inc(this, 1);
  }
}
procedure Rec()
{
  call Rec();
}
procedure Main()
{
  var this: Ref;
  var x: int;
  call this := New();
  while (true) {
    call x := Inc(this, 2);
    call Loop(this);
  }
}
";

    #[test]
    fn harness_unrolling_copies_the_round() {
        let p = parse_program(SRC).unwrap();
        let main = p.procedure("Main").unwrap();
        assert_eq!(unroll_harness(main, 0).body.items().len(), 1);
        let u = unroll_harness(main, 2);
        let items = u.body.items();
        // Each round contributes its two calls.
        assert_eq!(items.len(), 5);
        assert_eq!(items[1..3], items[3..5]);
    }

    #[test]
    fn inlining_renames_and_removes_calls() {
        let p = parse_program(SRC).unwrap();
        let main = unroll_harness(p.procedure("Main").unwrap(), 1);
        let got = inline_procedure(&p, &main, LoopMode::Unroll(2), 8).unwrap();
        let mut calls = vec![];
        got.body.visit(&mut |s| {
            if let IrStmt::Call { proc, .. } = s {
                calls.push(proc.clone());
            }
        });
        assert_eq!(calls, vec!["New"]);
        let text = print_procedure(&got);
        assert!(text.contains("d__1 := 2;"), "{text}");
        assert!(text.contains("g[this__1] := t__1;"), "{text}");
        assert!(text.contains("x := r__1;"), "{text}");
        assert!(text.contains("assume !(i__2 < 3);"), "{text}");
        assert!(got.var_type("t__3").is_some());
    }

    #[test]
    fn loop_cut_havocs_modified_state() {
        let p = parse_program(SRC).unwrap();
        let got = inline_procedure(&p, p.procedure("Loop").unwrap(), LoopMode::Cut, 8).unwrap();
        let text = print_procedure(&got);
        assert!(text.contains("havoc g;"), "{text}");
        assert!(text.contains("havoc i;"), "{text}");
        assert!(text.contains("assume false;"), "{text}");
    }

    #[test]
    fn recursion_hits_the_depth_limit() {
        let p = parse_program(SRC).unwrap();
        let r = inline_procedure(&p, p.procedure("Rec").unwrap(), LoopMode::Cut, 5);
        assert!(matches!(r, Err(VerifyError::RecursionDepthExceeded(5))));
    }
}
