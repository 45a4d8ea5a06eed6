//! Allocation primitives shared by every translated program.
//!
//! `Alloc` tracks which references are in use. `New` returns a single fresh
//! reference. `NewUnbounded` allocates an arbitrary set of fresh references
//! at once and is used to give every entry of a freshly created nested map
//! or array its own container.

use super::ast::*;

pub const ALLOC: &str = "Alloc";
pub const LENGTH: &str = "Length";
pub const DTYPE: &str = "DType";
pub const NEW: &str = "New";
pub const NEW_UNBOUNDED: &str = "NewUnbounded";

/// Global declarations every program carries.
pub fn prelude_globals() -> Vec<(String, IrType)> {
    vec![
        (ALLOC.into(), IrType::map(IrType::Ref, IrType::Bool)),
        (DTYPE.into(), IrType::map(IrType::Ref, IrType::Int)),
        (LENGTH.into(), IrType::map(IrType::Ref, IrType::Int)),
    ]
}

fn alloc(e: IrExpr) -> IrExpr {
    IrExpr::select(IrExpr::var(ALLOC), vec![e])
}

pub fn prelude_procedures() -> Vec<IrProcedure> {
    let ret = IrExpr::var("ret");
    let new = IrProcedure {
        name: NEW.into(),
        params: vec![],
        returns: vec![("ret".into(), IrType::Ref)],
        locals: vec![],
        body: IrStmt::seq(vec![
            IrStmt::Havoc("ret".into()),
            IrStmt::Assume(IrExpr::ne(ret.clone(), IrExpr::Null)),
            IrStmt::Assume(IrExpr::not(alloc(ret))),
            IrStmt::Store { map: ALLOC.into(), keys: vec![IrExpr::var("ret")], value: IrExpr::Bool(true) },
        ]),
    };
    let i = IrExpr::var("i");
    let unbounded = IrProcedure {
        name: NEW_UNBOUNDED.into(),
        params: vec![],
        returns: vec![],
        locals: vec![("oldAlloc".into(), IrType::map(IrType::Ref, IrType::Bool))],
        body: IrStmt::seq(vec![
            IrStmt::Assign("oldAlloc".into(), IrExpr::var(ALLOC)),
            IrStmt::Havoc(ALLOC.into()),
            IrStmt::Assume(IrExpr::forall(
                vec![("i".into(), IrType::Ref)],
                IrExpr::bin(IrBinOp::Implies, IrExpr::select(IrExpr::var("oldAlloc"), vec![i.clone()]), alloc(i)),
            )),
        ]),
    };
    vec![new, unbounded]
}

/// One level of a nested container: the heap map that holds its entries
/// and the type of its keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Level {
    pub map: String,
    pub key: IrType,
}

/// `χ(v, i1..ij)`: the container reached from `v` through `j` levels.
fn chi(v: &IrExpr, levels: &[Level], vars: &[String]) -> IrExpr {
    let mut e = v.clone();
    for (l, x) in levels.iter().zip(vars) {
        e = IrExpr::select(IrExpr::var(&l.map), vec![e, IrExpr::var(x)]);
    }
    e
}

/// Initialization of the fresh container `v` whose entries are reached
/// through `levels` (outermost first) and whose leaves start at `zero`.
///
/// For every inner level the entries are fresh, pairwise distinct,
/// zero-length containers. The final level maps every key to `zero`.
pub fn map_init(v: &IrExpr, levels: &[Level], zero: IrExpr) -> Vec<IrStmt> {
    let n = levels.len();
    let is: Vec<String> = (1..=n).map(|k| format!("i{k}")).collect();
    let js: Vec<String> = (1..=n).map(|k| format!("j{k}")).collect();
    let bind = |names: &[String]| -> Vec<(String, IrType)> {
        names.iter().zip(levels).map(|(x, l)| (x.clone(), l.key.clone())).collect()
    };
    let mut out = vec![];
    for j in 1..n {
        let vars = bind(&is[..j]);
        let c = chi(v, &levels[..j], &is[..j]);
        let len = IrExpr::select(IrExpr::var(LENGTH), vec![c.clone()]);
        out.push(IrStmt::Assume(IrExpr::forall(vars.clone(), IrExpr::eq(len, IrExpr::int(0)))));
        out.push(IrStmt::Assume(IrExpr::forall(vars.clone(), IrExpr::not(alloc(c.clone())))));
        out.push(IrStmt::call(NEW_UNBOUNDED, vec![], vec![]));
        out.push(IrStmt::Assume(IrExpr::forall(vars.clone(), alloc(c.clone()))));
        let mut both = vars;
        both.extend(bind(&js[..j]));
        let same = IrExpr::conj(
            is[..j].iter().zip(&js[..j]).map(|(a, b)| IrExpr::eq(IrExpr::var(a), IrExpr::var(b))).collect(),
        );
        let other = chi(v, &levels[..j], &js[..j]);
        out.push(IrStmt::Assume(IrExpr::forall(both, IrExpr::or(same, IrExpr::ne(c, other)))));
    }
    if n > 0 {
        let leaf = chi(v, levels, &is);
        out.push(IrStmt::Assume(IrExpr::forall(bind(&is), IrExpr::eq(leaf, zero))));
    }
    out
}
