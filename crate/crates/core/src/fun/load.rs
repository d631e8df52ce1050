//! Reading the functional form back from s-expression text.

use super::ir::{Expr, FunDef, FunProgram, Kind, PrimOp, Recursion, SPECIAL_FORMS};
use super::sexpr::{read_all, SExpr};
use crate::ll::Pos;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {message}")]
pub struct LoadError {
    pub message: String,
    pub pos: Pos,
}

fn err<T>(at: &SExpr, message: impl Into<String>) -> Result<T, LoadError> {
    Err(LoadError {
        message: message.into(),
        pos: at.pos(),
    })
}

/// Decimal, or hexadecimal with a `#x` prefix.
pub fn parse_number(s: &str) -> Option<u128> {
    match s.strip_prefix("#x").or_else(|| s.strip_prefix("#X")) {
        Some(h) if !h.is_empty() => u128::from_str_radix(h, 16).ok(),
        Some(_) => None,
        None if s.starts_with(|c: char| c.is_ascii_digit()) => s.parse().ok(),
        None => None,
    }
}

fn symbol(e: &SExpr, what: &str) -> Result<String, LoadError> {
    match e.as_atom() {
        Some(s)
            if parse_number(s).is_none()
                && !s.starts_with(|c: char| c.is_ascii_digit() || c == '#') =>
        {
            Ok(s.to_string())
        }
        _ => err(e, format!("expected {what}, found `{e}`")),
    }
}

fn list<'a>(e: &'a SExpr, what: &str) -> Result<&'a [SExpr], LoadError> {
    e.as_list()
        .map_or_else(|| err(e, format!("expected {what}, found `{e}`")), Ok)
}

fn kind(e: &SExpr) -> Result<Kind, LoadError> {
    e.as_atom()
        .and_then(Kind::from_predicate)
        .map_or_else(|| err(e, format!("unknown kind predicate `{e}`")), Ok)
}

pub fn load_expr(e: &SExpr) -> Result<Expr, LoadError> {
    let items = match e {
        SExpr::Atom(s, _) => {
            if let Some(n) = parse_number(s) {
                return Ok(Expr::Const(n));
            }
            return symbol(e, "a variable or number").map(Expr::Var);
        }
        SExpr::List(items, _) => items,
    };
    let Some(head) = items.first() else {
        return err(e, "empty form");
    };
    let head = symbol(head, "an operator")?;
    let args = &items[1..];
    let exprs = |xs: &[SExpr]| xs.iter().map(load_expr).collect::<Result<Vec<_>, _>>();
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            err(
                e,
                format!("`{head}` takes {n} operands, found {}", args.len()),
            )
        }
    };
    match head.as_str() {
        "if" => {
            arity(3)?;
            Ok(Expr::if_(
                load_expr(&args[0])?,
                load_expr(&args[1])?,
                load_expr(&args[2])?,
            ))
        }
        "let*" | "let" => {
            arity(2)?;
            let bs = list(&args[0], "a binding list")?;
            if head == "let" && bs.len() != 1 {
                return err(&args[0], "`let` takes exactly one binding; use `let*`");
            }
            let mut bindings = Vec::with_capacity(bs.len());
            for b in bs {
                match b.as_list() {
                    Some([name, value]) => {
                        bindings.push((symbol(name, "a variable")?, load_expr(value)?))
                    }
                    _ => return err(b, "expected a binding `(name value)`"),
                }
            }
            if bindings.is_empty() {
                return err(&args[0], "empty binding list");
            }
            Ok(Expr::Let(bindings, Box::new(load_expr(&args[1])?)))
        }
        "mvlist" => Ok(Expr::MvList(exprs(args)?)),
        "metlist" => {
            arity(3)?;
            let vars = list(&args[0], "a variable list")?
                .iter()
                .map(|v| symbol(v, "a variable"))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Expr::MetList(
                vars,
                Box::new(load_expr(&args[1])?),
                Box::new(load_expr(&args[2])?),
            ))
        }
        _ => match PrimOp::from_name(&head) {
            Some(op) => {
                arity(op.arity())?;
                Ok(Expr::Prim(op, exprs(args)?))
            }
            None => Ok(Expr::Call(head, exprs(args)?)),
        },
    }
}

pub fn load_def(form: &SExpr) -> Result<FunDef, LoadError> {
    let items = list(form, "a definition")?;
    let recursion = match form.head() {
        Some("defun") => Recursion::Plain,
        Some("defun-general") => Recursion::General,
        _ => return err(form, "expected `(defun ...)` or `(defun-general ...)`"),
    };
    let [_, name, params, declare, body] = items else {
        return err(
            form,
            "a definition has a name, parameters, a declaration and a body",
        );
    };
    let name = symbol(name, "a definition name")?;
    if SPECIAL_FORMS.contains(&name.as_str()) || PrimOp::from_name(&name).is_some() {
        return err(&items[1], format!("`{name}` is a built-in form"));
    }
    let params = list(params, "a parameter list")?
        .iter()
        .map(|p| symbol(p, "a parameter"))
        .collect::<Result<Vec<_>, _>>()?;
    let sig = match list(declare, "a declaration")? {
        [d, x] if d.as_atom() == Some("declare") => match list(x, "xargs")? {
            [xa, key, sig]
                if xa.as_atom() == Some("xargs") && key.as_atom() == Some(":signature") =>
            {
                list(sig, "a signature")?
            }
            _ => return err(x, "expected `(xargs :signature ...)`"),
        },
        _ => return err(declare, "expected `(declare (xargs :signature ...))`"),
    };
    let Some((pk, rk)) = sig.split_first() else {
        return err(declare, "empty signature");
    };
    let pkinds = list(pk, "parameter kinds")?
        .iter()
        .map(kind)
        .collect::<Result<Vec<_>, _>>()?;
    if pkinds.len() != params.len() {
        return err(
            pk,
            format!(
                "{} parameters but {} parameter kinds",
                params.len(),
                pkinds.len()
            ),
        );
    }
    let results = rk.iter().map(kind).collect::<Result<Vec<_>, _>>()?;
    if results.is_empty() {
        return err(declare, "a signature needs at least one result kind");
    }
    Ok(FunDef {
        name,
        params: params.into_iter().zip(pkinds).collect(),
        results,
        body: load_expr(body)?,
        recursion,
    })
}

pub fn load_program(src: &str) -> Result<FunProgram, LoadError> {
    let forms = read_all(src).map_err(|e| LoadError {
        message: e.message,
        pos: e.pos,
    })?;
    let defs = forms.iter().map(load_def).collect::<Result<Vec<_>, _>>()?;
    Ok(FunProgram { defs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers() {
        assert_eq!(parse_number("#xffff0000"), Some(0xffff0000));
        assert_eq!(parse_number("399"), Some(399));
        assert_eq!(parse_number("#x"), None);
        assert_eq!(parse_number("st"), None);
    }

    #[test]
    fn single_binding_let() {
        let e = load_expr(&read_all("(let ((x 1)) x)").unwrap()[0]).unwrap();
        assert_eq!(
            e,
            Expr::Let(vec![("x".into(), Expr::Const(1))], Box::new(Expr::var("x")))
        );
        assert!(load_expr(&read_all("(let ((x 1) (y 2)) x)").unwrap()[0]).is_err());
    }

    #[test]
    fn errors_are_positioned() {
        let e =
            load_program("(defun f (x st)\n  (declare (xargs :signature ((i64_p) stp)))\n  st)")
                .unwrap_err();
        assert_eq!(e.pos, Pos::new(2, 31));
        let e = load_program("(defun f (st) (declare (xargs :signature ((stp) stp))) (bits st 1))")
            .unwrap_err();
        assert!(e.message.contains("takes 3 operands"), "{e}");
    }
}
