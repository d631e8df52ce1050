//! Generic s-expressions: reader and an 80-column pretty printer.

use std::fmt;

use crate::ll::Pos;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Atom(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn atom(s: impl Into<String>) -> SExpr {
        SExpr::Atom(s.into(), Pos::default())
    }

    pub fn list(items: Vec<SExpr>) -> SExpr {
        SExpr::List(items, Pos::default())
    }

    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Atom(_, p) | SExpr::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(s, _) => Some(s),
            SExpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Some(items),
            SExpr::Atom(..) => None,
        }
    }

    /// The leading atom of a list.
    pub fn head(&self) -> Option<&str> {
        self.as_list()?.first()?.as_atom()
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Atom(s, _) => f.write_str(s),
            SExpr::List(items, _) => {
                f.write_str("(")?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {message}")]
pub struct ReadError {
    pub message: String,
    pub pos: Pos,
}

/// Read every top-level form. `;` starts a comment that runs to end of line.
pub fn read_all(src: &str) -> Result<Vec<SExpr>, ReadError> {
    let mut stack: Vec<(Vec<SExpr>, Pos)> = Vec::new();
    let mut top = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1u32, 1u32);
    let push = |stack: &mut Vec<(Vec<SExpr>, Pos)>, top: &mut Vec<SExpr>, e: SExpr| match stack
        .last_mut()
    {
        Some((items, _)) => items.push(e),
        None => top.push(e),
    };
    while let Some(&c) = chars.peek() {
        let pos = Pos::new(line, col);
        match c {
            '(' | ')' => {
                chars.next();
                col += 1;
                if c == '(' {
                    stack.push((Vec::new(), pos));
                } else {
                    let Some((items, start)) = stack.pop() else {
                        return Err(ReadError {
                            message: "unbalanced `)`".into(),
                            pos,
                        });
                    };
                    push(&mut stack, &mut top, SExpr::List(items, start));
                }
            }
            ';' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    chars.next();
                    col += 1;
                }
            }
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            _ => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | ';') {
                        break;
                    }
                    word.push(c);
                    chars.next();
                    col += 1;
                }
                push(&mut stack, &mut top, SExpr::Atom(word, pos));
            }
        }
    }
    if let Some((_, start)) = stack.pop() {
        return Err(ReadError {
            message: "unclosed `(`".into(),
            pos: start,
        });
    }
    Ok(top)
}

pub const WIDTH: usize = 80;

fn flat_len(e: &SExpr) -> usize {
    match e {
        SExpr::Atom(s, _) => s.len(),
        SExpr::List(items, _) => {
            2 + items.iter().map(flat_len).sum::<usize>() + items.len().saturating_sub(1)
        }
    }
}

fn newline(out: &mut String, col: usize) {
    out.push('\n');
    out.extend(std::iter::repeat_n(' ', col));
}

/// Pretty-print `e` starting at column `col`. Forms that fit on the rest of
/// the line are printed flat. Otherwise `let*` puts one binding per line,
/// `defun`, `defun-general` and `metlist` indent their bodies by two, and
/// any other list aligns its arguments under the first one.
pub fn pretty(e: &SExpr, col: usize, out: &mut String) {
    let SExpr::List(items, _) = e else {
        out.push_str(&e.to_string());
        return;
    };
    let head = e.head();
    let always_break = matches!(head, Some("defun" | "defun-general" | "let*"));
    if !always_break && col + flat_len(e) <= WIDTH {
        out.push_str(&e.to_string());
        return;
    }
    match (head, items.len()) {
        (Some("let*"), 3) => {
            out.push_str("(let* (");
            let inner = col + 7;
            let bindings = items[1].as_list().unwrap_or_default();
            for (i, b) in bindings.iter().enumerate() {
                if i > 0 {
                    newline(out, inner);
                }
                pretty_binding(b, inner, out);
            }
            out.push(')');
            newline(out, col + 2);
            pretty(&items[2], col + 2, out);
            out.push(')');
        }
        (Some(h @ ("defun" | "defun-general")), n) if n >= 3 => {
            out.push('(');
            out.push_str(h);
            out.push(' ');
            out.push_str(&items[1].to_string());
            out.push(' ');
            let c = col + h.len() + 2 + flat_len(&items[1]) + 1;
            pretty(&items[2], c, out);
            for x in &items[3..] {
                newline(out, col + 2);
                pretty(x, col + 2, out);
            }
            out.push(')');
        }
        (Some("metlist"), 4) => {
            out.push_str("(metlist ");
            pretty(&items[1], col + 9, out);
            for x in &items[2..] {
                newline(out, col + 2);
                pretty(x, col + 2, out);
            }
            out.push(')');
        }
        _ => pretty_generic(items, col, out),
    }
}

fn pretty_binding(b: &SExpr, col: usize, out: &mut String) {
    match b.as_list() {
        Some([name @ SExpr::Atom(..), value]) => {
            out.push('(');
            out.push_str(&name.to_string());
            out.push(' ');
            pretty(value, col + 2 + flat_len(name), out);
            out.push(')');
        }
        _ => pretty(b, col, out),
    }
}

fn pretty_generic(items: &[SExpr], col: usize, out: &mut String) {
    out.push('(');
    let Some((first, rest)) = items.split_first() else {
        out.push(')');
        return;
    };
    pretty(first, col + 1, out);
    if let (SExpr::Atom(h, _), Some((arg, more))) = (first, rest.split_first()) {
        let c = col + 2 + h.len();
        out.push(' ');
        pretty(arg, c, out);
        for x in more {
            newline(out, c);
            pretty(x, c, out);
        }
    } else {
        // Data lists: fill each line with as many items as fit.
        let mut at = out.len() - out.rfind('\n').map_or(0, |i| i + 1);
        for x in rest {
            let w = flat_len(x);
            if at + 1 + w < WIDTH {
                out.push(' ');
            } else {
                newline(out, col + 1);
            }
            let line_start = out.rfind('\n').map_or(0, |i| i + 1);
            pretty(x, out.len() - line_start, out);
            at = out.len() - out.rfind('\n').map_or(0, |i| i + 1);
        }
    }
    out.push(')');
}
