//! Static checks on functional programs.

use std::collections::{BTreeMap, BTreeSet};

use super::ir::{Expr, FunDef, FunProgram, Kind, PrimOp, Recursion, SPECIAL_FORMS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("in `{def}`: {message}")]
pub struct ValidationError {
    pub def: String,
    pub message: String,
}

fn fail<T>(d: &FunDef, message: impl Into<String>) -> Result<T, ValidationError> {
    Err(ValidationError {
        def: d.name.clone(),
        message: message.into(),
    })
}

/// Every variable is bound by a parameter, a `let*` or a `metlist`.
pub fn check_closed_terms(p: &FunProgram) -> Result<(), ValidationError> {
    fn walk(d: &FunDef, e: &Expr, scope: &mut Vec<String>) -> Result<(), ValidationError> {
        match e {
            Expr::Var(v) => {
                if !scope.iter().any(|s| s == v) {
                    return fail(d, format!("unbound variable `{v}`"));
                }
            }
            Expr::Const(_) => {}
            Expr::Prim(_, args) | Expr::Call(_, args) | Expr::MvList(args) => {
                for a in args {
                    walk(d, a, scope)?;
                }
            }
            Expr::If(c, t, f) => {
                walk(d, c, scope)?;
                walk(d, t, scope)?;
                walk(d, f, scope)?;
            }
            Expr::Let(bindings, body) => {
                let mark = scope.len();
                for (n, v) in bindings {
                    walk(d, v, scope)?;
                    scope.push(n.clone());
                }
                walk(d, body, scope)?;
                scope.truncate(mark);
            }
            Expr::MetList(vars, bound, body) => {
                walk(d, bound, scope)?;
                let mark = scope.len();
                scope.extend(vars.iter().cloned());
                walk(d, body, scope)?;
                scope.truncate(mark);
            }
        }
        Ok(())
    }
    for d in &p.defs {
        let mut scope: Vec<String> = d.params.iter().map(|(n, _)| n.clone()).collect();
        let distinct: BTreeSet<&String> = scope.iter().collect();
        if distinct.len() != scope.len() {
            return fail(d, "repeated parameter name");
        }
        walk(d, &d.body, &mut scope)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Shape {
    Nat,
    Bytes,
    State,
    Multi(Vec<Shape>),
}

fn shape_of_kind(k: Kind) -> Shape {
    if k == Kind::State {
        Shape::State
    } else {
        Shape::Nat
    }
}

fn shape_of_results(r: &[Kind]) -> Shape {
    match r {
        [k] => shape_of_kind(*k),
        ks => Shape::Multi(ks.iter().map(|k| shape_of_kind(*k)).collect()),
    }
}

/// The machine state is threaded linearly: exactly one state parameter and
/// one state result per definition, states are only ever bound to `st`
/// (so each new state hides the old one), and every operand has the kind
/// its operator expects.
pub fn check_state_threading(p: &FunProgram) -> Result<(), ValidationError> {
    let sigs: BTreeMap<&str, &FunDef> = p.defs.iter().map(|d| (d.name.as_str(), d)).collect();

    fn bind(d: &FunDef, name: &str, s: &Shape) -> Result<(), ValidationError> {
        match s {
            Shape::State if name != "st" => {
                fail(d, format!("state bound to `{name}` instead of `st`"))
            }
            Shape::Nat if name == "st" => fail(d, "`st` bound to a non-state value"),
            Shape::Bytes => fail(d, format!("byte run bound to `{name}`")),
            Shape::Multi(_) => fail(d, format!("multiple values bound to `{name}`; use metlist")),
            _ => Ok(()),
        }
    }

    fn walk(
        d: &FunDef,
        e: &Expr,
        env: &mut Vec<(String, Shape)>,
        sigs: &BTreeMap<&str, &FunDef>,
    ) -> Result<Shape, ValidationError> {
        let expect = |got: Shape, want: Shape, what: &dyn Fn() -> String| {
            if got == want {
                Ok(())
            } else {
                fail(d, format!("{} expects {want:?}, found {got:?}", what()))
            }
        };
        Ok(match e {
            Expr::Var(v) => match env.iter().rev().find(|(n, _)| n == v) {
                Some((_, s)) => s.clone(),
                None => return fail(d, format!("unbound variable `{v}`")),
            },
            Expr::Const(_) => Shape::Nat,
            Expr::Prim(op, args) => {
                if args.len() != op.arity() {
                    return fail(d, format!("`{}` takes {} operands", op.name(), op.arity()));
                }
                for (i, a) in args.iter().enumerate() {
                    let want = if op.state_arg() == Some(i) {
                        Shape::State
                    } else if *op == PrimOp::WFromBytes && i == 1 {
                        Shape::Bytes
                    } else {
                        Shape::Nat
                    };
                    let got = walk(d, a, env, sigs)?;
                    expect(got, want, &|| {
                        format!("operand {} of `{}`", i + 1, op.name())
                    })?;
                }
                if op.returns_state() {
                    Shape::State
                } else if *op == PrimOp::LoadBytes {
                    Shape::Bytes
                } else {
                    Shape::Nat
                }
            }
            Expr::Call(f, args) => {
                let Some(callee) = sigs.get(f.as_str()) else {
                    return fail(d, format!("call to undefined `{f}`"));
                };
                if args.len() != callee.params.len() {
                    return fail(
                        d,
                        format!(
                            "`{f}` takes {} arguments, found {}",
                            callee.params.len(),
                            args.len()
                        ),
                    );
                }
                for (i, (a, (_, k))) in args.iter().zip(&callee.params).enumerate() {
                    let got = walk(d, a, env, sigs)?;
                    expect(got, shape_of_kind(*k), &|| {
                        format!("argument {} of `{f}`", i + 1)
                    })?;
                }
                shape_of_results(&callee.results)
            }
            Expr::If(c, t, f) => {
                let cs = walk(d, c, env, sigs)?;
                expect(cs, Shape::Nat, &|| "an `if` condition".into())?;
                let ts = walk(d, t, env, sigs)?;
                let fs = walk(d, f, env, sigs)?;
                if ts != fs {
                    return fail(d, format!("`if` branches differ: {ts:?} and {fs:?}"));
                }
                ts
            }
            Expr::Let(bindings, body) => {
                let mark = env.len();
                for (n, v) in bindings {
                    let s = walk(d, v, env, sigs)?;
                    bind(d, n, &s)?;
                    env.push((n.clone(), s));
                }
                let s = walk(d, body, env, sigs)?;
                env.truncate(mark);
                s
            }
            Expr::MvList(xs) => {
                let mut shapes = Vec::with_capacity(xs.len());
                for x in xs {
                    let s = walk(d, x, env, sigs)?;
                    if !matches!(s, Shape::Nat | Shape::State) {
                        return fail(d, format!("mvlist element has shape {s:?}"));
                    }
                    shapes.push(s);
                }
                Shape::Multi(shapes)
            }
            Expr::MetList(vars, bound, body) => {
                let Shape::Multi(shapes) = walk(d, bound, env, sigs)? else {
                    return fail(d, "metlist binds a single value");
                };
                if shapes.len() != vars.len() {
                    return fail(
                        d,
                        format!(
                            "metlist binds {} names to {} values",
                            vars.len(),
                            shapes.len()
                        ),
                    );
                }
                let mark = env.len();
                for (v, s) in vars.iter().zip(shapes) {
                    bind(d, v, &s)?;
                    env.push((v.clone(), s));
                }
                let s = walk(d, body, env, sigs)?;
                env.truncate(mark);
                s
            }
        })
    }

    for d in &p.defs {
        let states = d.params.iter().filter(|(_, k)| *k == Kind::State).count();
        if states != 1 {
            return fail(d, format!("{states} state parameters"));
        }
        if d.results.iter().filter(|k| **k == Kind::State).count() != 1 {
            return fail(d, "results must contain exactly one state");
        }
        let mut env = Vec::new();
        for (n, k) in &d.params {
            let s = shape_of_kind(*k);
            bind(d, n, &s)?;
            env.push((n.clone(), s));
        }
        let got = walk(d, &d.body, &mut env, &sigs)?;
        let want = shape_of_results(&d.results);
        if got != want {
            return fail(
                d,
                format!("body has shape {got:?}, signature says {want:?}"),
            );
        }
    }
    Ok(())
}

/// Calls go to earlier definitions with the right number of arguments. A
/// definition calls itself only if it is general recursive, and only in
/// tail position. Only `_while` definitions are general recursive.
pub fn check_calls(p: &FunProgram) -> Result<(), ValidationError> {
    fn walk(
        d: &FunDef,
        e: &Expr,
        tail: bool,
        earlier: &BTreeMap<&str, usize>,
    ) -> Result<(), ValidationError> {
        match e {
            Expr::Var(_) | Expr::Const(_) => Ok(()),
            Expr::Prim(_, args) | Expr::MvList(args) => {
                args.iter().try_for_each(|a| walk(d, a, false, earlier))
            }
            Expr::Call(f, args) => {
                if *f == d.name {
                    if d.recursion != Recursion::General {
                        return fail(d, "recursive call in a non-general definition");
                    }
                    if !tail {
                        return fail(d, "recursive call not in tail position");
                    }
                    if args.len() != d.params.len() {
                        return fail(d, "recursive call with wrong number of arguments");
                    }
                } else {
                    match earlier.get(f.as_str()) {
                        Some(&n) if n == args.len() => {}
                        Some(&n) => {
                            return fail(
                                d,
                                format!("`{f}` takes {n} arguments, found {}", args.len()),
                            )
                        }
                        None => return fail(d, format!("call to `{f}` before its definition")),
                    }
                }
                args.iter().try_for_each(|a| walk(d, a, false, earlier))
            }
            Expr::If(c, t, f) => {
                walk(d, c, false, earlier)?;
                walk(d, t, tail, earlier)?;
                walk(d, f, tail, earlier)
            }
            Expr::Let(bindings, body) => {
                for (_, v) in bindings {
                    walk(d, v, false, earlier)?;
                }
                walk(d, body, tail, earlier)
            }
            Expr::MetList(_, bound, body) => {
                walk(d, bound, false, earlier)?;
                walk(d, body, tail, earlier)
            }
        }
    }
    let mut earlier: BTreeMap<&str, usize> = BTreeMap::new();
    for d in &p.defs {
        if SPECIAL_FORMS.contains(&d.name.as_str()) || PrimOp::from_name(&d.name).is_some() {
            return fail(d, "definition name is a built-in form");
        }
        if earlier.contains_key(d.name.as_str()) {
            return fail(d, "defined twice");
        }
        if d.recursion == Recursion::General && !d.name.ends_with("_while") {
            return fail(d, "only `_while` definitions may be general recursive");
        }
        walk(d, &d.body, true, &earlier)?;
        earlier.insert(&d.name, d.params.len());
    }
    Ok(())
}

/// The five definitions generated for one loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clique {
    pub entry: String,
    pub continue_: String,
    pub step: String,
    pub while_: String,
    pub wrap: String,
    /// Number of frame slots, `done` and the state excluded.
    pub frame: usize,
}

fn var_names(xs: &[Expr]) -> Option<Vec<&str>> {
    xs.iter()
        .map(|x| match x {
            Expr::Var(v) => Some(v.as_str()),
            _ => None,
        })
        .collect()
}

fn is_done_test(e: &Expr) -> bool {
    matches!(e, Expr::Prim(PrimOp::Eq, a) if a.len() == 2 && matches!(&a[0], Expr::Var(v) if v == "done") && a[1] == Expr::Const(1))
}

fn check_clique(p: &FunProgram, w: &FunDef) -> Result<Clique, ValidationError> {
    let base = w.name.strip_suffix("_while").expect("checked by caller");
    let (prefix, n) = base
        .rsplit_once("_step_")
        .filter(|(_, n)| !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()))
        .map_or_else(
            || fail(w, "while definition is not named `<f>_step_<n>_while`"),
            Ok,
        )?;
    let names = Clique {
        entry: format!("{prefix}_{n}"),
        continue_: format!("{prefix}_continue_{n}"),
        step: base.to_string(),
        while_: w.name.clone(),
        wrap: format!("{base}_while_wrap"),
        frame: w.params.len().saturating_sub(2),
    };
    let get = |name: &str| {
        p.def(name)
            .map_or_else(|| fail(w, format!("clique member `{name}` is missing")), Ok)
    };
    let step = get(&names.step)?;
    let wrap = get(&names.wrap)?;
    let cont = get(&names.continue_)?;
    let entry = get(&names.entry)?;
    for d in [step, wrap, cont, entry] {
        if d.recursion != Recursion::Plain {
            return fail(d, "clique member other than while is general recursive");
        }
    }
    let order = [
        &names.continue_,
        &names.step,
        &names.while_,
        &names.wrap,
        &names.entry,
    ]
    .map(|n| p.index_of(n).expect("present"));
    if order.windows(2).any(|w| w[1] != w[0] + 1) {
        return fail(
            w,
            "clique members are not consecutive in continue, step, while, wrap, entry order",
        );
    }

    // while: (done frame.. st) -> frame.. st
    let params: Vec<&str> = w.params.iter().map(|(n, _)| n.as_str()).collect();
    if params.first() != Some(&"done") || params.last() != Some(&"st") || w.params[0].1 != Kind::Nat
    {
        return fail(w, "parameters must be `done`, the frame, then `st`");
    }
    let frame_kinds: Vec<Kind> = w.params[1..].iter().map(|(_, k)| *k).collect();
    if w.results != frame_kinds {
        return fail(w, "results must be the frame then the state");
    }
    let frame_and_st = &params[1..];
    let Expr::If(c, stop, go) = &w.body else {
        return fail(w, "body must be an `if` on `done`");
    };
    if !is_done_test(c) {
        return fail(w, "body must test `(= done 1)`");
    }
    match &**stop {
        Expr::MvList(xs) if var_names(xs).as_deref() == Some(frame_and_st) => {}
        _ => return fail(w, "the done branch must return the frame unchanged"),
    }
    let Expr::MetList(vars, bound, body) = &**go else {
        return fail(w, "the loop branch must be a metlist over step");
    };
    let vars: Vec<&str> = vars.iter().map(String::as_str).collect();
    let call_is = |e: &Expr, f: &str| match e {
        Expr::Call(g, args) => g == f && var_names(args).as_deref() == Some(&params[..]),
        _ => false,
    };
    if vars != params || !call_is(bound, &names.step) || !call_is(body, &w.name) {
        return fail(w, "the loop branch must be `(metlist (done frame st) (step done frame st) (while done frame st))`");
    }

    // step: same parameters, results prefixed by done.
    if step.params != w.params {
        return fail(step, "parameters differ from the while definition");
    }
    if step.results.first() != Some(&Kind::Nat) || step.results[1..] != w.results[..] {
        return fail(step, "results must be `done` then the while results");
    }

    // wrap: (frame st) -> outer; runs while from done = 0, then continue.
    if wrap.params[..] != w.params[1..] {
        return fail(wrap, "parameters must be the frame and the state");
    }
    let Expr::MetList(wvars, wbound, wbody) = &wrap.body else {
        return fail(wrap, "body must be a metlist over while");
    };
    let wvars: Vec<&str> = wvars.iter().map(String::as_str).collect();
    let starts_from_zero = match &**wbound {
        Expr::Call(g, args) => {
            *g == w.name
                && args.first() == Some(&Expr::Const(0))
                && var_names(&args[1..]).as_deref() == Some(frame_and_st)
        }
        _ => false,
    };
    if wvars != frame_and_st || !starts_from_zero {
        return fail(wrap, "must bind the frame from `(while 0 frame st)`");
    }
    if !matches!(&**wbody, Expr::Call(g, _) if *g == names.continue_) {
        return fail(wrap, "must finish by calling continue");
    }
    if wrap.results != cont.results || entry.results != cont.results {
        return fail(wrap, "entry, wrap and continue must share result kinds");
    }

    // entry: decides done, then calls continue or wrap.
    let mut e = &entry.body;
    if let Expr::Let(_, body) = e {
        e = body;
    }
    match e {
        Expr::If(c, t, f)
            if is_done_test(c)
                && matches!(&**t, Expr::Call(g, _) if *g == names.continue_)
                && matches!(&**f, Expr::Call(g, _) if *g == names.wrap) => {}
        _ => {
            return fail(
                entry,
                "body must end in `(if (= done 1) (continue ...) (while_wrap ...))`",
            )
        }
    }
    Ok(names)
}

/// Check every loop's five definitions against the expected shape.
pub fn check_cliques(p: &FunProgram) -> Result<Vec<Clique>, ValidationError> {
    p.defs
        .iter()
        .filter(|d| d.recursion == Recursion::General)
        .map(|w| {
            if !w.name.ends_with("_while") {
                return fail(w, "only `_while` definitions may be general recursive");
            }
            check_clique(p, w)
        })
        .collect()
}

/// All checks.
pub fn validate_program(p: &FunProgram) -> Result<(), ValidationError> {
    check_closed_terms(p)?;
    check_calls(p)?;
    check_state_threading(p)?;
    check_cliques(p)?;
    Ok(())
}
