//! A direct interpreter for the parsed LLVM subset, used as the reference
//! when checking translated programs.

use std::collections::HashMap;

use ll2fun::ll::{BinOp, CastOp, IcmpPred, LlvmFunction, LlvmModule, Op, Operand, Terminator, Ty};
use ll2fun::MachineState;

fn width(ty: Ty) -> u32 {
    match ty {
        Ty::Int(w) => w as u32,
        Ty::Addr => 32,
    }
}

fn mask(w: u32) -> u64 {
    if w == 64 {
        u64::MAX
    } else {
        (1u64 << w) - 1
    }
}

fn to_signed(w: u32, x: u64) -> i64 {
    ((x << (64 - w)) as i64) >> (64 - w)
}

pub struct Interp<'m> {
    module: &'m LlvmModule,
    pub fuel: u64,
}

impl<'m> Interp<'m> {
    pub fn new(module: &'m LlvmModule, fuel: u64) -> Self {
        Interp { module, fuel }
    }

    /// Call `name` the way the translated driver does: open a stack frame,
    /// run the body, close the frame.
    pub fn call(&mut self, name: &str, args: &[u64], st: &mut MachineState) -> Result<(), String> {
        let f = self
            .module
            .function(name)
            .ok_or_else(|| format!("no function {name}"))?;
        st.begin_stack_frame();
        self.body(f, args, st)?;
        st.end_stack_frame().map_err(|e| e.to_string())
    }

    fn body(
        &mut self,
        f: &LlvmFunction,
        args: &[u64],
        st: &mut MachineState,
    ) -> Result<(), String> {
        let mut regs: HashMap<&str, u64> = HashMap::new();
        for (p, a) in f.params.iter().zip(args) {
            regs.insert(&p.name, a & mask(width(p.ty)));
        }
        let index: HashMap<&str, usize> = f
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (b.label.as_str(), i))
            .collect();
        let mut cur = 0usize;
        let mut prev: Option<&str> = None;
        loop {
            if self.fuel == 0 {
                return Err("out of fuel".into());
            }
            self.fuel -= 1;
            let b = &f.blocks[cur];
            if let Some(p) = prev {
                let vals: Vec<u64> = b
                    .phis
                    .iter()
                    .map(|phi| {
                        let op = phi.incoming_from(p).expect("phi covers predecessor");
                        Self::val(&regs, op)
                    })
                    .collect();
                for (phi, v) in b.phis.iter().zip(vals) {
                    regs.insert(&phi.result, v);
                }
            }
            for inst in &b.body {
                let v = self.op(&inst.op, &regs, st)?;
                if let (Some(r), Some(v)) = (&inst.result, v) {
                    regs.insert(r, v);
                }
            }
            let next = match &b.terminator {
                Terminator::Ret(v) => {
                    if let Some((_, v)) = v {
                        st.update_retval(Self::val(&regs, v) as u128);
                    }
                    return Ok(());
                }
                Terminator::Br(t) => t,
                Terminator::CondBr {
                    cond,
                    on_true,
                    on_false,
                } => {
                    if Self::val(&regs, cond) & 1 == 1 {
                        on_true
                    } else {
                        on_false
                    }
                }
            };
            prev = Some(&b.label);
            cur = index[next.as_str()];
        }
    }

    fn val(regs: &HashMap<&str, u64>, op: &Operand) -> u64 {
        match op {
            Operand::Reg(r) => regs[r.as_str()],
            Operand::Const(c) => *c,
        }
    }

    fn op(
        &mut self,
        op: &Op,
        regs: &HashMap<&str, u64>,
        st: &mut MachineState,
    ) -> Result<Option<u64>, String> {
        let v = |o: &Operand| Self::val(regs, o);
        Ok(Some(match op {
            Op::Bin { op, ty, lhs, rhs } => {
                let w = width(*ty);
                let (a, b) = (v(lhs), v(rhs));
                let r = match op {
                    BinOp::Add => a.wrapping_add(b),
                    BinOp::Sub => a.wrapping_sub(b),
                    BinOp::Mul => a.wrapping_mul(b),
                    BinOp::And => a & b,
                    BinOp::Or => a | b,
                    BinOp::Xor => a ^ b,
                    BinOp::Shl if b < w as u64 => a << b,
                    BinOp::Lshr if b < w as u64 => a >> b,
                    BinOp::Ashr if b < w as u64 => (to_signed(w, a) >> b) as u64,
                    BinOp::Shl | BinOp::Lshr | BinOp::Ashr => 0,
                };
                r & mask(w)
            }
            Op::Icmp { pred, ty, lhs, rhs } => {
                let w = width(*ty);
                let (a, b) = (v(lhs), v(rhs));
                let (sa, sb) = (to_signed(w, a), to_signed(w, b));
                (match pred {
                    IcmpPred::Eq => a == b,
                    IcmpPred::Ne => a != b,
                    IcmpPred::Ugt => a > b,
                    IcmpPred::Uge => a >= b,
                    IcmpPred::Ult => a < b,
                    IcmpPred::Ule => a <= b,
                    IcmpPred::Sgt => sa > sb,
                    IcmpPred::Sge => sa >= sb,
                    IcmpPred::Slt => sa < sb,
                    IcmpPred::Sle => sa <= sb,
                }) as u64
            }
            Op::Cast {
                op,
                from,
                to,
                value,
            } => {
                let x = v(value);
                match op {
                    CastOp::Zext => x,
                    CastOp::Sext => (to_signed(width(*from), x) as u64) & mask(width(*to)),
                    CastOp::Trunc => x & mask(width(*to)),
                }
            }
            Op::Select {
                cond,
                on_true,
                on_false,
                ..
            } => {
                if v(cond) & 1 == 1 {
                    v(on_true)
                } else {
                    v(on_false)
                }
            }
            Op::Gep {
                base,
                index_ty,
                index,
                elem_size,
            } => {
                let i = to_signed(width(*index_ty), v(index));
                (v(base) as i64).wrapping_add(i.wrapping_mul(*elem_size as i64)) as u64 & mask(32)
            }
            Op::Load { ty, addr } => {
                let n = (width(*ty) / 8) as u128;
                st.mem.rd_n(n, v(addr) as u128).map_err(|e| e.to_string())? as u64
            }
            Op::Store { ty, value, addr } => {
                let n = (width(*ty) / 8) as u128;
                st.mem
                    .wr_n(n, v(addr) as u128, v(value) as u128)
                    .map_err(|e| e.to_string())?;
                return Ok(None);
            }
            Op::Alloca { size } => st.alloca(*size as u128).map_err(|e| e.to_string())? as u64,
            Op::Call { callee, ret, args } => {
                let args: Vec<u64> = args.iter().map(|(_, a)| v(a)).collect();
                self.call(callee, &args, st)?;
                match ret {
                    Some(ty) => (st.retval as u64) & mask(width(*ty)),
                    None => return Ok(None),
                }
            }
        }))
    }
}
