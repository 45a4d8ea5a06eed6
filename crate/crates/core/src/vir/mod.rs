//! A small Boogie-like verification IR.
//!
//! Programs consist of global variables (including the heap maps),
//! uninterpreted functions, integer constants, axioms and procedures whose
//! bodies use havoc, assignment, map update, assume, assert, call,
//! conditionals and loops.

pub mod ast;
pub mod interp;
pub mod parser;
pub mod prelude;
pub mod printer;

use thiserror::Error;

pub use ast::*;
pub use parser::{parse_expr, parse_program, parse_stmts};
pub use printer::{print_procedure, print_program};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VirError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[cfg(test)]
mod tests {
    use super::prelude::*;
    use super::*;

    fn sample() -> IrProgram {
        let src = r#"
var x_C: [Ref]Ref;
var M_int_Ref: [Ref][int]Ref;
var M_int_int: [Ref][int]int;
function StrToInt(int): int;
const A: int = 1;
const B: int = 2;
axiom StrToInt(0) == 0;
procedure f_A(this: Ref, k: int, msg_sender: Ref) returns (r: int)
{
  var t: bool;
  var v: Ref;
  havoc t;
  if (t && !(k < 0) || k == -3) {
    r := M_int_int[M_int_Ref[x_C[this]][0]][1];
  } else if (DType[this] == B) {
    r := -(k) * (k + 1) - (2 - k) div 3;
  } else {
    assume false;
  }
  M_int_int[M_int_Ref[x_C[this]][k]][1] := r mod 5;
  while (r > 0) {
    r := r - 1;
  }
  call v := New();
  call NewUnbounded();
  assume (forall i: int, j: int :: i == j || M_int_Ref[v][i] != M_int_Ref[v][j]);
  assert {:msg "7:3 \"q\""} (t ==> k > 0) ==> r >= 0;
  assert {:msg ""} t ==> k > 0 ==> r >= 0;
}
"#;
        let mut p = parse_program(src).unwrap();
        p.globals.extend(prelude_globals());
        p.procedures.extend(prelude_procedures());
        p.normalize();
        p
    }

    #[test]
    fn print_parse_round_trip() {
        let p = sample();
        let text = print_program(&p);
        let q = parse_program(&text).unwrap();
        assert_eq!(p, q, "{text}");
        assert_eq!(print_program(&q), text);
    }

    #[test]
    fn implication_is_right_associative() {
        let e = parse_expr("a ==> b ==> c").unwrap();
        let IrExpr::Binary(IrBinOp::Implies, l, _) = &e else { panic!() };
        assert_eq!(**l, IrExpr::var("a"));
        let f = parse_expr("(a ==> b) ==> c").unwrap();
        assert_ne!(e, f);
        assert_eq!(f.to_string(), "(a ==> b) ==> c");
    }

    #[test]
    fn nested_selects_flatten() {
        let e = parse_expr("M[x][1][2]").unwrap();
        let IrExpr::Select(b, ks) = &e else { panic!() };
        assert_eq!(**b, IrExpr::var("M"));
        assert_eq!(ks.len(), 3);
        assert_eq!(IrExpr::select(IrExpr::select(IrExpr::var("M"), vec![IrExpr::var("x")]), vec![IrExpr::int(1)]).to_string(), "M[x][1]");
    }

    #[test]
    fn seq_flattens_and_drops_skip() {
        let s = IrStmt::seq(vec![
            IrStmt::Skip,
            IrStmt::seq(vec![IrStmt::Havoc("a".into()), IrStmt::Havoc("b".into())]),
            IrStmt::Havoc("c".into()),
        ]);
        assert_eq!(s.items().len(), 3);
        assert_eq!(IrStmt::seq(vec![IrStmt::Skip]), IrStmt::Skip);
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = parse_program("var x: int;\nprocedure p() {\n  x := ;\n}").unwrap_err();
        assert!(matches!(err, VirError::Parse { line: 3, .. }), "{err}");
    }
}
