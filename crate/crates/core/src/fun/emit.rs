//! Printing the functional form as s-expression text.

use super::ir::{Expr, FunDef, FunProgram, Recursion};
use super::sexpr::{pretty, SExpr};

pub fn expr_to_sexpr(e: &Expr) -> SExpr {
    let list = |head: &str, rest: Vec<SExpr>| {
        let mut items = vec![SExpr::atom(head)];
        items.extend(rest);
        SExpr::list(items)
    };
    let all = |xs: &[Expr]| xs.iter().map(expr_to_sexpr).collect::<Vec<_>>();
    match e {
        Expr::Var(v) => SExpr::atom(v),
        Expr::Const(c) => SExpr::atom(c.to_string()),
        Expr::Prim(op, args) => list(op.name(), all(args)),
        Expr::Call(f, args) => list(f, all(args)),
        Expr::If(c, t, f) => list(
            "if",
            vec![expr_to_sexpr(c), expr_to_sexpr(t), expr_to_sexpr(f)],
        ),
        Expr::Let(bindings, body) => {
            let bs = bindings
                .iter()
                .map(|(n, v)| SExpr::list(vec![SExpr::atom(n), expr_to_sexpr(v)]))
                .collect();
            list("let*", vec![SExpr::list(bs), expr_to_sexpr(body)])
        }
        Expr::MvList(xs) => list("mvlist", all(xs)),
        Expr::MetList(vars, bound, body) => list(
            "metlist",
            vec![
                SExpr::list(vars.iter().map(SExpr::atom).collect()),
                expr_to_sexpr(bound),
                expr_to_sexpr(body),
            ],
        ),
    }
}

pub fn def_to_sexpr(d: &FunDef) -> SExpr {
    let head = match d.recursion {
        Recursion::Plain => "defun",
        Recursion::General => "defun-general",
    };
    let params = SExpr::list(d.params.iter().map(|(n, _)| SExpr::atom(n)).collect());
    let mut sig = vec![SExpr::list(
        d.params
            .iter()
            .map(|(_, k)| SExpr::atom(k.predicate()))
            .collect(),
    )];
    sig.extend(d.results.iter().map(|k| SExpr::atom(k.predicate())));
    let declare = SExpr::list(vec![
        SExpr::atom("declare"),
        SExpr::list(vec![
            SExpr::atom("xargs"),
            SExpr::atom(":signature"),
            SExpr::list(sig),
        ]),
    ]);
    SExpr::list(vec![
        SExpr::atom(head),
        SExpr::atom(&d.name),
        params,
        declare,
        expr_to_sexpr(&d.body),
    ])
}

pub fn emit_def(d: &FunDef) -> String {
    let mut out = String::new();
    pretty(&def_to_sexpr(d), 0, &mut out);
    out.push('\n');
    out
}

/// The program as text: one definition per paragraph, in order.
pub fn emit_program(p: &FunProgram) -> String {
    p.defs.iter().map(emit_def).collect::<Vec<_>>().join("\n")
}
