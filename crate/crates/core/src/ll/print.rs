//! Printer for the AST. The output uses opaque pointer syntax and reparses
//! to a structurally identical module.

use std::fmt::Write;

use super::ast::*;
use super::lexer::tokenize;
use super::TokenKind;

fn bare_name_ok(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '$' | '.' | '_'))
}

fn local(name: &str) -> String {
    if bare_name_ok(name) {
        format!("%{name}")
    } else {
        format!("%\"{name}\"")
    }
}

fn global(name: &str) -> String {
    if bare_name_ok(name) {
        format!("@{name}")
    } else {
        format!("@\"{name}\"")
    }
}

fn label_def(name: &str) -> String {
    // A bare label must lex as one word followed by `:`.
    let bare = bare_name_ok(name)
        && !name.starts_with('-')
        && tokenize(&format!("{name}:"))
            .map(|t| t.len() == 1 && t[0].kind == TokenKind::Label)
            .unwrap_or(false);
    if bare {
        format!("{name}:")
    } else {
        format!("\"{name}\":")
    }
}

fn operand(op: &Operand, ty: Ty) -> String {
    match (op, ty) {
        (Operand::Reg(r), _) => local(r),
        (Operand::Const(0), Ty::Addr) => "null".to_string(),
        (Operand::Const(c), _) => c.to_string(),
    }
}

/// A type whose store size is `bytes`, for gep and alloca.
fn sized_type(bytes: u64) -> String {
    match bytes {
        1 | 2 | 4 | 8 => format!("i{}", bytes * 8),
        n => format!("[{n} x i8]"),
    }
}

fn print_op(out: &mut String, op: &Op) {
    match op {
        Op::Bin { op, ty, lhs, rhs } => {
            let _ = write!(
                out,
                "{} {ty} {}, {}",
                op.mnemonic(),
                operand(lhs, *ty),
                operand(rhs, *ty)
            );
        }
        Op::Icmp { pred, ty, lhs, rhs } => {
            let _ = write!(
                out,
                "icmp {} {ty} {}, {}",
                pred.mnemonic(),
                operand(lhs, *ty),
                operand(rhs, *ty)
            );
        }
        Op::Cast {
            op,
            from,
            to,
            value,
        } => {
            let _ = write!(
                out,
                "{} {from} {} to {to}",
                op.mnemonic(),
                operand(value, *from)
            );
        }
        Op::Select {
            cond,
            ty,
            on_true,
            on_false,
        } => {
            let _ = write!(
                out,
                "select i1 {}, {ty} {}, {ty} {}",
                operand(cond, Ty::Int(1)),
                operand(on_true, *ty),
                operand(on_false, *ty)
            );
        }
        Op::Gep {
            base,
            index_ty,
            index,
            elem_size,
        } => {
            let _ = write!(
                out,
                "getelementptr {}, ptr {}, {index_ty} {}",
                sized_type(*elem_size),
                operand(base, Ty::Addr),
                operand(index, *index_ty)
            );
        }
        Op::Load { ty, addr } => {
            let _ = write!(out, "load {ty}, ptr {}", operand(addr, Ty::Addr));
        }
        Op::Store { ty, value, addr } => {
            let _ = write!(
                out,
                "store {ty} {}, ptr {}",
                operand(value, *ty),
                operand(addr, Ty::Addr)
            );
        }
        Op::Alloca { size } => {
            let _ = write!(out, "alloca {}", sized_type(*size));
        }
        Op::Call { callee, ret, args } => {
            let ret = ret.map(|t| t.to_string()).unwrap_or_else(|| "void".into());
            let args: Vec<String> = args
                .iter()
                .map(|(ty, a)| format!("{ty} {}", operand(a, *ty)))
                .collect();
            let _ = write!(out, "call {ret} {}({})", global(callee), args.join(", "));
        }
    }
}

pub fn print_function(out: &mut String, f: &LlvmFunction) {
    let ret = f
        .ret
        .map(|t| t.to_string())
        .unwrap_or_else(|| "void".into());
    let params: Vec<String> = f
        .params
        .iter()
        .map(|p| format!("{} {}", p.ty, local(&p.name)))
        .collect();
    let _ = writeln!(
        out,
        "define {ret} {}({}) {{",
        global(&f.name),
        params.join(", ")
    );
    for (i, b) in f.blocks.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "{}", label_def(&b.label));
        for phi in &b.phis {
            let incoming: Vec<String> = phi
                .incoming
                .iter()
                .map(|(v, l)| format!("[ {}, {} ]", operand(v, phi.ty), local(l)))
                .collect();
            let _ = writeln!(
                out,
                "  {} = phi {} {}",
                local(&phi.result),
                phi.ty,
                incoming.join(", ")
            );
        }
        for inst in &b.body {
            out.push_str("  ");
            if let Some(r) = &inst.result {
                let _ = write!(out, "{} = ", local(r));
            }
            print_op(out, &inst.op);
            out.push('\n');
        }
        out.push_str("  ");
        match &b.terminator {
            Terminator::Br(t) => {
                let _ = write!(out, "br label {}", local(t));
            }
            Terminator::CondBr {
                cond,
                on_true,
                on_false,
            } => {
                let _ = write!(
                    out,
                    "br i1 {}, label {}, label {}",
                    operand(cond, Ty::Int(1)),
                    local(on_true),
                    local(on_false)
                );
            }
            Terminator::Ret(None) => out.push_str("ret void"),
            Terminator::Ret(Some((ty, v))) => {
                let _ = write!(out, "ret {ty} {}", operand(v, *ty));
            }
        }
        out.push('\n');
    }
    out.push_str("}\n");
}

pub fn print_module(m: &LlvmModule) -> String {
    let mut out = String::new();
    for note in &m.target_notes {
        let _ = writeln!(out, "{note}");
    }
    for d in &m.declarations {
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "declare void {}()", global(d));
    }
    for a in &m.aliases {
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "{} = alias ptr {}", global(&a.name), global(&a.target));
    }
    for f in &m.functions {
        if !out.is_empty() {
            out.push('\n');
        }
        print_function(&mut out, f);
    }
    out
}
