//! Lowering definitions to slot-addressed trees for execution.

use std::collections::HashMap;

use crate::fun::{Expr, FunDef, FunProgram, Kind, PrimOp, Recursion};

pub type Slot = u32;

/// Where a state-reading primitive finds its state.
#[derive(Debug, Clone)]
pub enum StateArg {
    /// Borrowed from a variable without moving it.
    Slot(Slot),
    Node(Box<Node>),
}

#[derive(Debug, Clone)]
pub enum Node {
    Const(u128),
    Copy(Slot),
    /// Last use of a variable: its value is taken out of the environment.
    Move(Slot),
    Prim(PrimOp, Box<[Node]>),
    /// `loadbytes`, `retval` or `stack`: the non-state operands, then the state.
    Read(PrimOp, Box<[Node]>, StateArg),
    /// `(wfrombytes n (loadbytes n p st))`.
    LoadWord(Box<Node>, Box<Node>, StateArg),
    Call {
        def: u32,
        args: Box<[Node]>,
        tail: bool,
    },
    If(Box<Node>, Box<Node>, Box<Node>),
    Let(Slot, Box<Node>, Box<Node>),
    MvList(Box<[Node]>),
    MetList(Box<[Slot]>, Box<Node>, Box<Node>),
}

#[derive(Debug, Clone)]
pub struct CompiledDef {
    pub name: String,
    pub params: Vec<(String, Kind)>,
    pub results: Vec<Kind>,
    pub general: bool,
    /// Environment size: parameters first, then one slot per binding.
    pub slots: usize,
    pub body: Node,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("in `{def}`: {message}")]
pub struct CompileError {
    pub def: String,
    pub message: String,
}

struct Compiler<'a> {
    def: &'a FunDef,
    index: &'a HashMap<String, u32>,
    arities: &'a [usize],
    scope: Vec<(String, Slot)>,
    next: Slot,
}

impl Compiler<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, CompileError> {
        Err(CompileError {
            def: self.def.name.clone(),
            message: message.into(),
        })
    }

    fn lookup(&self, v: &str) -> Result<Slot, CompileError> {
        match self.scope.iter().rev().find(|(n, _)| n == v) {
            Some((_, s)) => Ok(*s),
            None => self.err(format!("unbound variable `{v}`")),
        }
    }

    fn fresh(&mut self, name: &str) -> Slot {
        let s = self.next;
        self.next += 1;
        self.scope.push((name.to_string(), s));
        s
    }

    fn state_arg(&mut self, e: &Expr) -> Result<StateArg, CompileError> {
        Ok(match e {
            Expr::Var(v) => StateArg::Slot(self.lookup(v)?),
            e => StateArg::Node(Box::new(self.expr(e, false)?)),
        })
    }

    fn all(&mut self, xs: &[Expr]) -> Result<Box<[Node]>, CompileError> {
        xs.iter().map(|x| self.expr(x, false)).collect()
    }

    fn expr(&mut self, e: &Expr, tail: bool) -> Result<Node, CompileError> {
        Ok(match e {
            Expr::Var(v) => Node::Copy(self.lookup(v)?),
            Expr::Const(c) => Node::Const(*c),
            Expr::Prim(op, args) => {
                if args.len() != op.arity() {
                    return self.err(format!("`{}` takes {} operands", op.name(), op.arity()));
                }
                match (op, &args[..]) {
                    (PrimOp::WFromBytes, [n, Expr::Prim(PrimOp::LoadBytes, inner)])
                        if inner.len() == 3 && *n == inner[0] =>
                    {
                        Node::LoadWord(
                            Box::new(self.expr(n, false)?),
                            Box::new(self.expr(&inner[1], false)?),
                            self.state_arg(&inner[2])?,
                        )
                    }
                    (PrimOp::LoadBytes | PrimOp::Retval | PrimOp::Stack, _) => {
                        let (st, rest) = args.split_last().expect("arity is positive");
                        Node::Read(*op, self.all(rest)?, self.state_arg(st)?)
                    }
                    _ => Node::Prim(*op, self.all(args)?),
                }
            }
            Expr::Call(f, args) => {
                let Some(&def) = self.index.get(f) else {
                    return self.err(format!("call to undefined `{f}`"));
                };
                if self.arities[def as usize] != args.len() {
                    return self.err(format!(
                        "`{f}` takes {} arguments",
                        self.arities[def as usize]
                    ));
                }
                Node::Call {
                    def,
                    args: self.all(args)?,
                    tail,
                }
            }
            Expr::If(c, t, f) => Node::If(
                Box::new(self.expr(c, false)?),
                Box::new(self.expr(t, tail)?),
                Box::new(self.expr(f, tail)?),
            ),
            Expr::Let(bindings, body) => {
                let mark = self.scope.len();
                let mut values = Vec::with_capacity(bindings.len());
                for (n, v) in bindings {
                    let v = self.expr(v, false)?;
                    values.push((self.fresh(n), v));
                }
                let mut node = self.expr(body, tail)?;
                for (s, v) in values.into_iter().rev() {
                    node = Node::Let(s, Box::new(v), Box::new(node));
                }
                self.scope.truncate(mark);
                node
            }
            Expr::MvList(xs) => Node::MvList(self.all(xs)?),
            Expr::MetList(vars, bound, body) => {
                let bound = self.expr(bound, false)?;
                let mark = self.scope.len();
                let slots: Box<[Slot]> = vars.iter().map(|v| self.fresh(v)).collect();
                let body = self.expr(body, tail)?;
                self.scope.truncate(mark);
                Node::MetList(slots, Box::new(bound), Box::new(body))
            }
        })
    }
}

/// Turn the last use of each variable on every path into a move. `live`
/// holds the slots read later on the current path.
fn mark_moves(n: &mut Node, live: &mut Vec<bool>) {
    fn use_slot(s: Slot, live: &mut [bool]) -> bool {
        let was = live[s as usize];
        live[s as usize] = true;
        was
    }
    fn state(a: &mut StateArg, live: &mut Vec<bool>) {
        match a {
            StateArg::Slot(s) => {
                use_slot(*s, live);
            }
            StateArg::Node(n) => mark_moves(n, live),
        }
    }
    fn seq(ns: &mut [Node], live: &mut Vec<bool>) {
        for n in ns.iter_mut().rev() {
            mark_moves(n, live);
        }
    }
    match n {
        Node::Const(_) | Node::Move(_) => {}
        Node::Copy(s) => {
            if !use_slot(*s, live) {
                *n = Node::Move(*s);
            }
        }
        Node::Prim(_, args) | Node::MvList(args) | Node::Call { args, .. } => seq(args, live),
        Node::Read(_, args, st) => {
            state(st, live);
            seq(args, live);
        }
        Node::LoadWord(k, p, st) => {
            state(st, live);
            mark_moves(p, live);
            mark_moves(k, live);
        }
        Node::If(c, t, f) => {
            let mut other = live.clone();
            mark_moves(t, live);
            mark_moves(f, &mut other);
            for (a, b) in live.iter_mut().zip(other) {
                *a |= b;
            }
            mark_moves(c, live);
        }
        Node::Let(s, v, body) => {
            mark_moves(body, live);
            live[*s as usize] = false;
            mark_moves(v, live);
        }
        Node::MetList(slots, bound, body) => {
            mark_moves(body, live);
            for s in slots.iter() {
                live[*s as usize] = false;
            }
            mark_moves(bound, live);
        }
    }
}

pub fn compile_program(p: &FunProgram) -> Result<Vec<CompiledDef>, CompileError> {
    let mut index = HashMap::new();
    for (i, d) in p.defs.iter().enumerate() {
        if index.insert(d.name.clone(), i as u32).is_some() {
            return Err(CompileError {
                def: d.name.clone(),
                message: "defined twice".into(),
            });
        }
    }
    let arities: Vec<usize> = p.defs.iter().map(|d| d.params.len()).collect();
    p.defs
        .iter()
        .map(|d| {
            let mut c = Compiler {
                def: d,
                index: &index,
                arities: &arities,
                scope: Vec::new(),
                next: 0,
            };
            for (n, _) in &d.params {
                c.fresh(n);
            }
            let mut body = c.expr(&d.body, true)?;
            let slots = c.next as usize;
            mark_moves(&mut body, &mut vec![false; slots]);
            Ok(CompiledDef {
                name: d.name.clone(),
                params: d.params.clone(),
                results: d.results.clone(),
                general: d.recursion == Recursion::General,
                slots,
                body,
            })
        })
        .collect()
}
