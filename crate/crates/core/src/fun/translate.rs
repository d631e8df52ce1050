//! SSA to functional translation.
//!
//! Each block becomes a definition whose parameters are the block's phi
//! registers, then its other live-in registers, then the state. Straight-line
//! code becomes one `let*`, and a branch becomes a call (or an `if` over two
//! calls) passing each successor its phi actuals.
//!
//! Loop `N` becomes five definitions:
//!
//! * `<f>_continue_N` runs the code after the loop;
//! * `<f>_step_N` runs one iteration and returns the `done` bit followed by
//!   the loop frame;
//! * `<f>_step_N_while` repeats `step` until `done` is 1;
//! * `<f>_step_N_while_wrap` runs the loop from a frame, then `continue`;
//! * `<f>_N` computes the initial `done` bit and picks `continue` or
//!   `while_wrap`.
//!
//! The loop frame is the header's phi registers, then the registers live
//! into the header (loop invariants), then any extra slots needed to carry
//! values out through the exit edge.

use std::collections::{BTreeMap, BTreeSet};

use super::ir::{Expr, FunDef, FunProgram, Kind, PrimOp, Recursion, SPECIAL_FORMS};
use super::mangle::{block_def_name, mangle_ident, RegisterNames};
use crate::analysis::{analyze_function, AnalysisError, FunctionAnalysis, LoopInfo};
use crate::ll::{
    BinOp, CastOp, IcmpPred, LlvmFunction, LlvmModule, Op, Operand, Pos, Terminator, Ty,
};

pub fn kind_of(ty: Ty) -> Kind {
    match ty {
        Ty::Int(w) => Kind::Int(w),
        Ty::Addr => Kind::Addr,
    }
}

/// What a call site needs to know about a callee.
#[derive(Debug, Clone)]
pub struct CalleeSig {
    pub def_name: String,
    pub params: Vec<Ty>,
    pub ret: Option<Ty>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Summary {
    pub functions: usize,
    pub blocks: usize,
    pub loops: usize,
}

#[derive(Debug, Clone)]
pub struct Translation {
    pub program: FunProgram,
    pub summary: Summary,
}

/// Value carried out of a loop for one parameter of the exit block.
#[derive(Debug, Clone)]
enum Source {
    Const(u64),
    Slot(usize),
}

#[derive(Debug, Clone)]
struct Frame {
    /// Mangled slot names and kinds: phis, invariants, exit slots.
    slots: Vec<(String, Kind)>,
    n_phis: usize,
    n_invariants: usize,
    /// Values the slots take on the back edge.
    back: Vec<Expr>,
    /// Values the slots take on the exit edge.
    exit: Vec<Expr>,
    /// One per parameter of the exit block (before the state).
    exit_args: Vec<Source>,
}

impl Frame {
    fn kinds(&self) -> Vec<Kind> {
        self.slots.iter().map(|(_, k)| *k).collect()
    }

    fn vars(&self) -> Vec<Expr> {
        self.slots.iter().map(|(n, _)| Expr::var(n)).collect()
    }

    fn names(&self) -> Vec<String> {
        self.slots.iter().map(|(n, _)| n.clone()).collect()
    }
}

const ST: &str = "st";
const DONE: &str = "done";

fn st() -> Expr {
    Expr::var(ST)
}

fn c(v: u64) -> Expr {
    Expr::Const(v as u128)
}

struct FunctionTranslator<'a> {
    f: &'a LlvmFunction,
    a: &'a FunctionAnalysis,
    name: String,
    regs: RegisterNames,
    types: BTreeMap<String, Ty>,
    callees: &'a BTreeMap<String, CalleeSig>,
    frames: Vec<Frame>,
}

impl<'a> FunctionTranslator<'a> {
    fn new(
        f: &'a LlvmFunction,
        a: &'a FunctionAnalysis,
        name: String,
        callees: &'a BTreeMap<String, CalleeSig>,
    ) -> Self {
        let types = f.register_types();
        let regs = RegisterNames::new(types.keys().map(String::as_str));
        let mut t = FunctionTranslator {
            f,
            a,
            name,
            regs,
            types,
            callees,
            frames: Vec::new(),
        };
        t.frames = a.loops.loops.iter().map(|l| t.build_frame(l)).collect();
        t
    }

    fn err(&self, pos: Pos, msg: impl Into<String>) -> AnalysisError {
        AnalysisError::new(self.f, pos, msg)
    }

    fn reg(&self, r: &str) -> String {
        self.regs.get(r).to_string()
    }

    fn kind(&self, r: &str) -> Kind {
        kind_of(self.types[r])
    }

    fn operand(&self, op: &Operand) -> Expr {
        match op {
            Operand::Reg(r) => Expr::var(self.reg(r)),
            Operand::Const(v) => c(*v),
        }
    }

    fn label(&self, b: usize) -> &str {
        self.a.cfg.label(b)
    }

    // ---- names --------------------------------------------------------

    fn entry_name(&self, l: &LoopInfo) -> String {
        format!("{}_{}", self.name, l.index)
    }

    fn continue_name(&self, l: &LoopInfo) -> String {
        format!("{}_continue_{}", self.name, l.index)
    }

    fn step_name(&self, l: &LoopInfo) -> String {
        format!("{}_step_{}", self.name, l.index)
    }

    fn while_name(&self, l: &LoopInfo) -> String {
        format!("{}_step_{}_while", self.name, l.index)
    }

    fn wrap_name(&self, l: &LoopInfo) -> String {
        format!("{}_step_{}_while_wrap", self.name, l.index)
    }

    /// The definition that runs block `b`.
    fn block_def(&self, b: usize) -> String {
        match self.a.loops.merged_into(b) {
            Some(l) => self.entry_name(l),
            None => block_def_name(&self.name, self.label(b)),
        }
    }

    // ---- signatures ---------------------------------------------------

    /// Raw parameter registers of block `b`.
    fn block_params(&self, b: usize) -> Vec<String> {
        self.a.signatures[b].params().cloned().collect()
    }

    fn block_param_decls(&self, b: usize) -> Vec<(String, Kind)> {
        let mut ps: Vec<(String, Kind)> = self
            .block_params(b)
            .iter()
            .map(|r| (self.reg(r), self.kind(r)))
            .collect();
        ps.push((ST.to_string(), Kind::State));
        ps
    }

    /// Result kinds of code running in loop `ctx` (top level when `None`).
    fn results(&self, ctx: Option<usize>) -> Vec<Kind> {
        match ctx {
            None => vec![Kind::State],
            Some(l) => {
                let mut r = vec![Kind::Nat];
                r.extend(self.frames[l].kinds());
                r.push(Kind::State);
                r
            }
        }
    }

    /// Registers in scope inside block `b`'s definition.
    fn scope(&self, b: usize) -> BTreeSet<String> {
        let mut s: BTreeSet<String> = self.block_params(b).into_iter().collect();
        for inst in &self.f.blocks[b].body {
            if let Some(r) = &inst.result {
                s.insert(r.clone());
            }
        }
        s
    }

    /// Values passed along the edge `from -> to`: the target's phi actuals,
    /// then its other live-in registers.
    fn edge_args(&self, from: usize, to: usize) -> Vec<Operand> {
        let from_label = self.label(from);
        let mut args: Vec<Operand> = self.f.blocks[to]
            .phis
            .iter()
            .map(|p| {
                p.incoming_from(from_label)
                    .cloned()
                    .expect("phi incoming values are checked when the CFG is built")
            })
            .collect();
        args.extend(
            self.a.signatures[to]
                .flow_params
                .iter()
                .map(|r| Operand::Reg(r.clone())),
        );
        args
    }

    // ---- loop frames --------------------------------------------------

    fn build_frame(&self, l: &LoopInfo) -> Frame {
        let header = &self.f.blocks[l.header];
        let latch_label = self.label(l.latch);
        let invariants = &self.a.signatures[l.header].flow_params;
        let mut slots: Vec<(String, Kind)> = Vec::new();
        let mut back: Vec<Expr> = Vec::new();
        for phi in &header.phis {
            slots.push((self.reg(&phi.result), self.kind(&phi.result)));
            let actual = phi
                .incoming_from(latch_label)
                .expect("latch is a predecessor");
            back.push(self.operand(actual));
        }
        for r in invariants {
            slots.push((self.reg(r), self.kind(r)));
            back.push(Expr::var(self.reg(r)));
        }
        let n_phis = header.phis.len();
        let n_invariants = invariants.len();

        // What each phi slot holds after the exit edge. When the latch exits,
        // the exit shares the back edge's values.
        let exiting_is_latch = l.exiting == l.latch;
        let mut claimed: Vec<Option<Operand>> = header
            .phis
            .iter()
            .map(|p| {
                exiting_is_latch
                    .then(|| p.incoming_from(latch_label).cloned().expect("latch actual"))
            })
            .collect();

        let mut exit_regs: Vec<String> = Vec::new();
        let mut exit_args = Vec::new();
        for v in self.edge_args(l.exiting, l.exit) {
            let r = match v {
                Operand::Const(k) => {
                    exit_args.push(Source::Const(k));
                    continue;
                }
                Operand::Reg(r) => r,
            };
            if let Some(i) = invariants.iter().position(|x| *x == r) {
                exit_args.push(Source::Slot(n_phis + i));
                continue;
            }
            let held = Operand::Reg(r.clone());
            if let Some(k) = claimed.iter().position(|c| c.as_ref() == Some(&held)) {
                exit_args.push(Source::Slot(k));
                continue;
            }
            if !exiting_is_latch {
                if let Some(k) = header.phis.iter().position(|p| p.result == r) {
                    claimed[k] = Some(held);
                    exit_args.push(Source::Slot(k));
                    continue;
                }
            }
            let i = match exit_regs.iter().position(|x| *x == r) {
                Some(i) => i,
                None => {
                    exit_regs.push(r.clone());
                    exit_regs.len() - 1
                }
            };
            exit_args.push(Source::Slot(n_phis + n_invariants + i));
        }

        let scope = self.scope(l.exiting);
        let in_scope_or_zero = |r: &str| {
            if scope.contains(r) {
                Expr::var(self.reg(r))
            } else {
                c(0)
            }
        };
        let mut exit: Vec<Expr> = Vec::new();
        for (k, phi) in header.phis.iter().enumerate() {
            exit.push(match &claimed[k] {
                Some(op) => self.operand(op),
                None => in_scope_or_zero(&phi.result),
            });
        }
        for r in invariants {
            exit.push(in_scope_or_zero(r));
        }
        for r in &exit_regs {
            // A phi leaving the loop by a latch that exits needs a second
            // slot under another name.
            let mut name = self.reg(r);
            if slots.iter().any(|(n, _)| *n == name) {
                let avoid: Vec<&str> = slots.iter().map(|(n, _)| n.as_str()).collect();
                name = self.regs.fresh(&format!("{name}_exit"), &avoid);
            }
            slots.push((name, self.kind(r)));
            back.push(c(0));
            exit.push(Expr::var(self.reg(r)));
        }
        Frame {
            slots,
            n_phis,
            n_invariants,
            back,
            exit,
            exit_args,
        }
    }

    /// Frame values on entry to loop `l` from its preheader.
    fn initial_frame(&self, l: &LoopInfo) -> Vec<Expr> {
        let frame = &self.frames[l.index];
        let pre = self.label(l.preheader);
        let mut vals: Vec<Expr> = self.f.blocks[l.header]
            .phis
            .iter()
            .map(|p| self.operand(p.incoming_from(pre).expect("preheader is a predecessor")))
            .collect();
        vals.extend(
            frame.slots[frame.n_phis..frame.n_phis + frame.n_invariants]
                .iter()
                .map(|(n, _)| Expr::var(n)),
        );
        vals.extend((frame.n_phis + frame.n_invariants..frame.slots.len()).map(|_| c(0)));
        vals
    }

    // ---- instructions -------------------------------------------------

    fn lower_instruction(
        &self,
        op: &Op,
        result: Option<&str>,
        pos: Pos,
    ) -> Result<Vec<(String, Expr)>, AnalysisError> {
        let o = |x: &Operand| self.operand(x);
        let bind = |e: Expr| -> Vec<(String, Expr)> {
            match result {
                Some(r) => vec![(self.reg(r), e)],
                None => vec![],
            }
        };
        let low = |e: Expr, w: u8| Expr::prim(PrimOp::Bits, vec![e, c(w as u64 - 1), c(0)]);
        Ok(match op {
            Op::Bin { op, ty, lhs, rhs } => {
                let w = ty.bits();
                let (a, b) = (o(lhs), o(rhs));
                let e = match op {
                    BinOp::Add => low(Expr::prim(PrimOp::Add, vec![a, b]), w),
                    BinOp::Mul => low(Expr::prim(PrimOp::Mul, vec![a, b]), w),
                    BinOp::Sub => Expr::prim(PrimOp::BvSub, vec![c(w as u64), a, b]),
                    BinOp::And => Expr::prim(PrimOp::LogAnd, vec![a, b]),
                    BinOp::Or => Expr::prim(PrimOp::LogIor, vec![a, b]),
                    BinOp::Xor => Expr::prim(PrimOp::LogXor, vec![a, b]),
                    BinOp::Shl => Expr::prim(PrimOp::BvShl, vec![c(w as u64), a, b]),
                    BinOp::Lshr => Expr::prim(PrimOp::BvLshr, vec![c(w as u64), a, b]),
                    BinOp::Ashr => Expr::prim(PrimOp::BvAshr, vec![c(w as u64), a, b]),
                };
                bind(e)
            }
            Op::Icmp { pred, ty, lhs, rhs } => {
                let (a, b) = (o(lhs), o(rhs));
                let w = c(ty.bits() as u64);
                let e = match pred {
                    IcmpPred::Eq => Expr::prim(PrimOp::Eq, vec![a, b]),
                    IcmpPred::Ne => Expr::prim(PrimOp::Ne, vec![a, b]),
                    IcmpPred::Ugt => Expr::prim(PrimOp::Gt, vec![a, b]),
                    IcmpPred::Uge => Expr::prim(PrimOp::Ge, vec![a, b]),
                    IcmpPred::Ult => Expr::prim(PrimOp::Lt, vec![a, b]),
                    IcmpPred::Ule => Expr::prim(PrimOp::Le, vec![a, b]),
                    IcmpPred::Sgt => Expr::prim(PrimOp::Sgt, vec![w, a, b]),
                    IcmpPred::Sge => Expr::prim(PrimOp::Sge, vec![w, a, b]),
                    IcmpPred::Slt => Expr::prim(PrimOp::Slt, vec![w, a, b]),
                    IcmpPred::Sle => Expr::prim(PrimOp::Sle, vec![w, a, b]),
                };
                bind(e)
            }
            Op::Cast {
                op,
                from,
                to,
                value,
            } => {
                let v = o(value);
                let e = match op {
                    CastOp::Zext => v,
                    CastOp::Sext => Expr::prim(
                        PrimOp::Sext,
                        vec![c(from.bits() as u64), c(to.bits() as u64), v],
                    ),
                    CastOp::Trunc => low(v, to.bits()),
                };
                bind(e)
            }
            Op::Select {
                cond,
                on_true,
                on_false,
                ..
            } => bind(Expr::if_(Expr::is_one(o(cond)), o(on_true), o(on_false))),
            Op::Gep {
                base,
                index_ty,
                index,
                elem_size,
            } => {
                let mut idx = o(index);
                if index_ty.bits() < 32 {
                    idx = Expr::prim(PrimOp::Sext, vec![c(index_ty.bits() as u64), c(32), idx]);
                }
                let offset = Expr::prim(PrimOp::Mul, vec![idx, c(*elem_size)]);
                bind(low(Expr::prim(PrimOp::Add, vec![o(base), offset]), 32))
            }
            Op::Load { ty, addr } => {
                let n = c(ty
                    .store_bytes()
                    .expect("loads of i1 are rejected by the parser")
                    as u64);
                let bytes = Expr::prim(PrimOp::LoadBytes, vec![n.clone(), o(addr), st()]);
                bind(Expr::prim(PrimOp::WFromBytes, vec![n, bytes]))
            }
            Op::Store { ty, value, addr } => {
                let n = c(ty
                    .store_bytes()
                    .expect("stores of i1 are rejected by the parser")
                    as u64);
                vec![(
                    ST.into(),
                    Expr::prim(PrimOp::StoreBytes, vec![n, o(addr), o(value), st()]),
                )]
            }
            Op::Alloca { size } => {
                let mut out = bind(Expr::prim(PrimOp::Stack, vec![st()]));
                out.push((ST.into(), Expr::prim(PrimOp::Alloca, vec![c(*size), st()])));
                out
            }
            Op::Call { callee, ret, args } => {
                let Some(sig) = self.callees.get(callee) else {
                    return Err(self.err(pos, format!("call to unknown function `@{callee}`")));
                };
                let arg_tys: Vec<Ty> = args.iter().map(|(t, _)| *t).collect();
                if arg_tys != sig.params || *ret != sig.ret {
                    return Err(self.err(
                        pos,
                        format!("call to `@{callee}` does not match its definition"),
                    ));
                }
                let mut call_args: Vec<Expr> = args.iter().map(|(_, a)| o(a)).collect();
                call_args.push(st());
                let mut out = vec![(ST.to_string(), Expr::call(&sig.def_name, call_args))];
                if let (Some(r), Some(ty)) = (result, ret) {
                    out.push((
                        self.reg(r),
                        low(Expr::prim(PrimOp::Retval, vec![st()]), ty.bits()),
                    ));
                }
                out
            }
        })
    }

    fn block_lets(&self, b: usize) -> Result<Vec<(String, Expr)>, AnalysisError> {
        let mut lets = Vec::new();
        for inst in &self.f.blocks[b].body {
            lets.extend(self.lower_instruction(&inst.op, inst.result.as_deref(), inst.pos)?);
        }
        Ok(lets)
    }

    // ---- control transfer ---------------------------------------------

    fn mvlist(done: u64, mut vals: Vec<Expr>) -> Expr {
        vals.insert(0, c(done));
        vals.push(st());
        Expr::MvList(vals)
    }

    /// Code for following the edge `from -> to` in loop context `ctx`.
    fn edge(&self, from: usize, to: usize, ctx: Option<usize>) -> Expr {
        if let Some(n) = ctx {
            let l = &self.a.loops.loops[n];
            if to == l.header && from == l.latch {
                return Self::mvlist(0, self.frames[n].back.clone());
            }
            if from == l.exiting && to == l.exit {
                return Self::mvlist(1, self.frames[n].exit.clone());
            }
        }
        if let Some(child) = self.a.loops.by_header(to) {
            let mut args = self.initial_frame(child);
            args.push(st());
            return Expr::call(self.entry_name(child), args);
        }
        let mut args: Vec<Expr> = self
            .edge_args(from, to)
            .iter()
            .map(|a| self.operand(a))
            .collect();
        args.push(st());
        Expr::call(self.block_def(to), args)
    }

    /// Translate block `b`'s terminator, appending any bindings it needs.
    fn terminator(&self, b: usize, ctx: Option<usize>, lets: &mut Vec<(String, Expr)>) -> Expr {
        let cfg = &self.a.cfg;
        match &self.f.blocks[b].terminator {
            Terminator::Ret(None) => st(),
            Terminator::Ret(Some((_, v))) => {
                lets.push((
                    ST.into(),
                    Expr::prim(PrimOp::UpdateRetval, vec![self.operand(v), st()]),
                ));
                st()
            }
            Terminator::Br(t) => self.edge(b, cfg.index_of(t).expect("checked label"), ctx),
            Terminator::CondBr {
                cond,
                on_true,
                on_false,
            } => {
                let t = self.edge(b, cfg.index_of(on_true).expect("checked label"), ctx);
                let e = self.edge(b, cfg.index_of(on_false).expect("checked label"), ctx);
                if let (Expr::MvList(tv), Expr::MvList(ev)) = (&t, &e) {
                    if tv[1..] == ev[1..] {
                        // Both arms return the same frame: only `done` differs.
                        let done = if tv[0] == c(1) {
                            self.operand(cond)
                        } else {
                            Expr::prim(PrimOp::Eq, vec![self.operand(cond), c(0)])
                        };
                        lets.push((DONE.into(), done));
                        let mut vals = tv.clone();
                        vals[0] = Expr::var(DONE);
                        return Expr::MvList(vals);
                    }
                }
                Expr::if_(Expr::is_one(self.operand(cond)), t, e)
            }
        }
    }

    fn plain_block(&self, b: usize) -> Result<FunDef, AnalysisError> {
        let ctx = self.a.loops.innermost[b];
        let mut lets = self.block_lets(b)?;
        let tail = self.terminator(b, ctx, &mut lets);
        Ok(FunDef {
            name: self.block_def(b),
            params: self.block_param_decls(b),
            results: self.results(ctx),
            body: Expr::let_(lets, tail),
            recursion: Recursion::Plain,
        })
    }

    fn clique(&self, l: &LoopInfo) -> Result<Vec<FunDef>, AnalysisError> {
        let frame = &self.frames[l.index];
        let outer = l.parent;
        let outer_results = self.results(outer);
        let frame_params = || -> Vec<(String, Kind)> {
            let mut ps = frame.slots.clone();
            ps.push((ST.into(), Kind::State));
            ps
        };
        let with_done = |mut ps: Vec<(String, Kind)>| {
            ps.insert(0, (DONE.into(), Kind::Nat));
            ps
        };
        let with_st = |mut v: Vec<Expr>| {
            v.push(st());
            v
        };

        // continue: the exit block's code.
        let continue_params = self.block_param_decls(l.exit);
        let continue_def = FunDef {
            name: self.continue_name(l),
            body: Expr::call(
                self.block_def(l.exit),
                continue_params.iter().map(|(n, _)| Expr::var(n)).collect(),
            ),
            params: continue_params,
            results: outer_results.clone(),
            recursion: Recursion::Plain,
        };

        // step: the header's code, one iteration.
        let mut lets = self.block_lets(l.header)?;
        let tail = self.terminator(l.header, Some(l.index), &mut lets);
        let step_def = FunDef {
            name: self.step_name(l),
            params: with_done(frame_params()),
            results: self.results(Some(l.index)),
            body: Expr::let_(lets, tail),
            recursion: Recursion::Plain,
        };

        // while: iterate step until done.
        let mut loop_vars = vec![Expr::var(DONE)];
        loop_vars.extend(frame.vars());
        let mut bound = vec![DONE.to_string()];
        bound.extend(frame.names());
        bound.push(ST.into());
        let while_body = Expr::if_(
            Expr::is_one(Expr::var(DONE)),
            Expr::MvList(with_st(frame.vars())),
            Expr::MetList(
                bound,
                Box::new(Expr::call(self.step_name(l), with_st(loop_vars.clone()))),
                Box::new(Expr::call(self.while_name(l), with_st(loop_vars))),
            ),
        );
        let mut while_results = frame.kinds();
        while_results.push(Kind::State);
        let while_def = FunDef {
            name: self.while_name(l),
            params: with_done(frame_params()),
            results: while_results,
            body: while_body,
            recursion: Recursion::General,
        };

        // while_wrap: run the loop, then continue with the exit values.
        let exit_args: Vec<Expr> = frame
            .exit_args
            .iter()
            .map(|s| match s {
                Source::Const(k) => c(*k),
                Source::Slot(i) => Expr::var(&frame.slots[*i].0),
            })
            .collect();
        let mut wrap_bound = frame.names();
        wrap_bound.push(ST.into());
        let mut while_args = vec![c(0)];
        while_args.extend(frame.vars());
        let wrap_def = FunDef {
            name: self.wrap_name(l),
            params: frame_params(),
            results: outer_results.clone(),
            body: Expr::MetList(
                wrap_bound,
                Box::new(Expr::call(self.while_name(l), with_st(while_args))),
                Box::new(Expr::call(self.continue_name(l), with_st(exit_args))),
            ),
            recursion: Recursion::Plain,
        };

        // entry: decide between skipping and running the loop.
        let entry_def = if l.entry_merged {
            let p = l.preheader;
            let mut lets = self.block_lets(p)?;
            let Terminator::CondBr { cond, on_true, .. } = &self.f.blocks[p].terminator else {
                unreachable!("a merged preheader ends in a conditional branch")
            };
            let exit_on_true = self.a.cfg.index_of(on_true) == Some(l.exit);
            let done = if exit_on_true {
                self.operand(cond)
            } else {
                Expr::prim(PrimOp::Eq, vec![self.operand(cond), c(0)])
            };
            lets.push((DONE.into(), done));
            let skip_args: Vec<Expr> = self
                .edge_args(p, l.exit)
                .iter()
                .map(|a| self.operand(a))
                .collect();
            let body = Expr::if_(
                Expr::is_one(Expr::var(DONE)),
                Expr::call(self.continue_name(l), with_st(skip_args)),
                Expr::call(self.wrap_name(l), with_st(self.initial_frame(l))),
            );
            FunDef {
                name: self.entry_name(l),
                params: self.block_param_decls(p),
                results: outer_results,
                body: Expr::let_(lets, body),
                recursion: Recursion::Plain,
            }
        } else {
            // Entered unconditionally: `done` starts at 0. The skip branch is
            // never taken; it passes loop invariants through and zero
            // elsewhere.
            let skip_args: Vec<Expr> = frame
                .exit_args
                .iter()
                .map(|s| match s {
                    Source::Const(k) => c(*k),
                    Source::Slot(i)
                        if (frame.n_phis..frame.n_phis + frame.n_invariants).contains(i) =>
                    {
                        Expr::var(&frame.slots[*i].0)
                    }
                    Source::Slot(_) => c(0),
                })
                .collect();
            let body = Expr::let_(
                vec![(DONE.into(), c(0))],
                Expr::if_(
                    Expr::is_one(Expr::var(DONE)),
                    Expr::call(self.continue_name(l), with_st(skip_args)),
                    Expr::call(self.wrap_name(l), with_st(frame.vars())),
                ),
            );
            FunDef {
                name: self.entry_name(l),
                params: frame_params(),
                results: outer_results,
                body,
                recursion: Recursion::Plain,
            }
        };
        Ok(vec![continue_def, step_def, while_def, wrap_def, entry_def])
    }

    fn driver(&self) -> FunDef {
        let mut params: Vec<(String, Kind)> = self
            .f
            .params
            .iter()
            .map(|p| (self.reg(&p.name), kind_of(p.ty)))
            .collect();
        params.push((ST.into(), Kind::State));
        let mut entry_args: Vec<Expr> = self.a.signatures[0]
            .flow_params
            .iter()
            .map(|r| Expr::var(self.reg(r)))
            .collect();
        entry_args.push(st());
        let lets = vec![
            (
                ST.to_string(),
                Expr::prim(PrimOp::InitStackFrame, vec![st()]),
            ),
            (
                ST.to_string(),
                Expr::prim(PrimOp::BeginStackFrame, vec![st()]),
            ),
            (ST.to_string(), Expr::call(self.block_def(0), entry_args)),
        ];
        FunDef {
            name: self.name.clone(),
            params,
            results: vec![Kind::State],
            body: Expr::let_(lets, Expr::prim(PrimOp::EndStackFrame, vec![st()])),
            recursion: Recursion::Plain,
        }
    }

    fn translate(&self) -> Result<Vec<FunDef>, AnalysisError> {
        let mut defs = Vec::new();
        for unit in &self.a.units {
            match *unit {
                crate::analysis::Unit::Block(b) => defs.push(self.plain_block(b)?),
                crate::analysis::Unit::Clique(n) => {
                    defs.extend(self.clique(&self.a.loops.loops[n])?)
                }
            }
        }
        defs.push(self.driver());
        let mut seen = BTreeSet::new();
        for d in &defs {
            if !seen.insert(d.name.as_str()) {
                return Err(self.err(
                    self.f.pos,
                    format!("generated definition name `{}` is used twice", d.name),
                ));
            }
        }
        Ok(defs)
    }
}

/// Translate one analysed function. `callees` maps LLVM function names to
/// their translated drivers.
pub fn translate_function(
    f: &LlvmFunction,
    analysis: &FunctionAnalysis,
    callees: &BTreeMap<String, CalleeSig>,
) -> Result<Vec<FunDef>, AnalysisError> {
    let name = callees
        .get(&f.name)
        .map(|s| s.def_name.clone())
        .unwrap_or_else(|| mangle_ident(&f.name));
    FunctionTranslator::new(f, analysis, name, callees).translate()
}

/// Functions ordered so that callees come first. Recursion and calls to
/// functions without a body are rejected.
fn function_order(m: &LlvmModule) -> Result<Vec<usize>, AnalysisError> {
    let index: BTreeMap<&str, usize> = m
        .functions
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name.as_str(), i))
        .collect();
    let mut calls: Vec<Vec<(usize, Pos)>> = Vec::with_capacity(m.functions.len());
    for f in &m.functions {
        let mut out = Vec::new();
        for b in &f.blocks {
            for inst in &b.body {
                if let Op::Call { callee, .. } = &inst.op {
                    match index.get(callee.as_str()) {
                        Some(&j) => out.push((j, inst.pos)),
                        None if m.declarations.contains(callee) => {
                            return Err(AnalysisError::new(
                                f,
                                inst.pos,
                                format!("call to external function `@{callee}` is not supported"),
                            ))
                        }
                        None => {
                            return Err(AnalysisError::new(
                                f,
                                inst.pos,
                                format!("call to undefined function `@{callee}`"),
                            ))
                        }
                    }
                }
            }
        }
        calls.push(out);
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; m.functions.len()];
    let mut order = Vec::new();
    for root in 0..m.functions.len() {
        if mark[root] != Mark::New {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        mark[root] = Mark::Active;
        while let Some(&mut (f, ref mut i)) = stack.last_mut() {
            if *i < calls[f].len() {
                let (g, pos) = calls[f][*i];
                *i += 1;
                match mark[g] {
                    Mark::New => {
                        mark[g] = Mark::Active;
                        stack.push((g, 0));
                    }
                    Mark::Active => {
                        return Err(AnalysisError::new(
                            &m.functions[f],
                            pos,
                            format!(
                                "recursive call to `@{}` is not supported",
                                m.functions[g].name
                            ),
                        ))
                    }
                    Mark::Done => {}
                }
            } else {
                mark[f] = Mark::Done;
                order.push(f);
                stack.pop();
            }
        }
    }
    Ok(order)
}

/// Translate every function of an alias-free module.
pub fn translate_module(m: &LlvmModule) -> Result<Translation, AnalysisError> {
    let mut callees: BTreeMap<String, CalleeSig> = BTreeMap::new();
    let mut owners: BTreeMap<String, &str> = BTreeMap::new();
    for f in &m.functions {
        let def_name = mangle_ident(&f.name);
        if SPECIAL_FORMS.contains(&def_name.as_str()) || PrimOp::from_name(&def_name).is_some() {
            return Err(AnalysisError::new(
                f,
                f.pos,
                format!("function name `{def_name}` clashes with a built-in form"),
            ));
        }
        if let Some(other) = owners.insert(def_name.clone(), &f.name) {
            return Err(AnalysisError::new(
                f,
                f.pos,
                format!(
                    "functions `@{other}` and `@{}` both translate to `{def_name}`",
                    f.name
                ),
            ));
        }
        callees.insert(
            f.name.clone(),
            CalleeSig {
                def_name,
                params: f.params.iter().map(|p| p.ty).collect(),
                ret: f.ret,
            },
        );
    }
    let order = function_order(m)?;
    let mut program = FunProgram::default();
    let mut summary = Summary::default();
    let mut names = BTreeSet::new();
    for i in order {
        let f = &m.functions[i];
        let analysis = analyze_function(f)?;
        summary.functions += 1;
        summary.blocks += f.blocks.len();
        summary.loops += analysis.loops.len();
        for d in translate_function(f, &analysis, &callees)? {
            if !names.insert(d.name.clone()) {
                return Err(AnalysisError::new(
                    f,
                    f.pos,
                    format!("generated definition name `{}` is used twice", d.name),
                ));
            }
            program.defs.push(d);
        }
    }
    Ok(Translation { program, summary })
}
