//! Abstract syntax for the supported subset of LLVM textual IR.
//!
//! The tree keeps SSA form intact: every register is named once, phis are
//! split out of the instruction body, and each block carries exactly one
//! terminator. Integer constants are stored as unsigned residues of their
//! declared width.

use std::collections::BTreeMap;
use std::fmt;

/// 1-based line and column in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub fn new(line: u32, col: u32) -> Self {
        Pos { line, col }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Integer widths accepted by the front end.
pub const SUPPORTED_WIDTHS: [u8; 5] = [1, 8, 16, 32, 64];

/// Addresses are 32 bits wide.
pub const ADDRESS_BITS: u8 = 32;

/// The type of a first-class value in the subset: a fixed-width integer or an
/// address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ty {
    Int(u8),
    Addr,
}

impl Ty {
    pub fn bits(self) -> u8 {
        match self {
            Ty::Int(w) => w,
            Ty::Addr => ADDRESS_BITS,
        }
    }

    /// Size in bytes when stored to memory. `i1` has no memory form here.
    pub fn store_bytes(self) -> Option<u8> {
        match self {
            Ty::Int(1) => None,
            Ty::Int(w) => Some(w / 8),
            Ty::Addr => Some(ADDRESS_BITS / 8),
        }
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Int(w) => write!(f, "i{w}"),
            Ty::Addr => f.write_str("ptr"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Reg(String),
    Const(u64),
}

impl Operand {
    pub fn reg(&self) -> Option<&str> {
        match self {
            Operand::Reg(r) => Some(r),
            Operand::Const(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
    Shl,
    Lshr,
    Ashr,
}

impl BinOp {
    pub const ALL: [BinOp; 9] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::And,
        BinOp::Or,
        BinOp::Xor,
        BinOp::Shl,
        BinOp::Lshr,
        BinOp::Ashr,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
            BinOp::Shl => "shl",
            BinOp::Lshr => "lshr",
            BinOp::Ashr => "ashr",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<BinOp> {
        BinOp::ALL.into_iter().find(|op| op.mnemonic() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IcmpPred {
    Eq,
    Ne,
    Ugt,
    Uge,
    Ult,
    Ule,
    Sgt,
    Sge,
    Slt,
    Sle,
}

impl IcmpPred {
    pub const ALL: [IcmpPred; 10] = [
        IcmpPred::Eq,
        IcmpPred::Ne,
        IcmpPred::Ugt,
        IcmpPred::Uge,
        IcmpPred::Ult,
        IcmpPred::Ule,
        IcmpPred::Sgt,
        IcmpPred::Sge,
        IcmpPred::Slt,
        IcmpPred::Sle,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            IcmpPred::Eq => "eq",
            IcmpPred::Ne => "ne",
            IcmpPred::Ugt => "ugt",
            IcmpPred::Uge => "uge",
            IcmpPred::Ult => "ult",
            IcmpPred::Ule => "ule",
            IcmpPred::Sgt => "sgt",
            IcmpPred::Sge => "sge",
            IcmpPred::Slt => "slt",
            IcmpPred::Sle => "sle",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<IcmpPred> {
        IcmpPred::ALL.into_iter().find(|p| p.mnemonic() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CastOp {
    Zext,
    Sext,
    Trunc,
}

impl CastOp {
    pub fn mnemonic(self) -> &'static str {
        match self {
            CastOp::Zext => "zext",
            CastOp::Sext => "sext",
            CastOp::Trunc => "trunc",
        }
    }
}

/// A non-phi, non-terminator instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Bin {
        op: BinOp,
        ty: Ty,
        lhs: Operand,
        rhs: Operand,
    },
    Icmp {
        pred: IcmpPred,
        ty: Ty,
        lhs: Operand,
        rhs: Operand,
    },
    Cast {
        op: CastOp,
        from: Ty,
        to: Ty,
        value: Operand,
    },
    Select {
        cond: Operand,
        ty: Ty,
        on_true: Operand,
        on_false: Operand,
    },
    /// Single-index address computation: `base + index * elem_size`.
    Gep {
        base: Operand,
        index_ty: Ty,
        index: Operand,
        elem_size: u64,
    },
    Load {
        ty: Ty,
        addr: Operand,
    },
    Store {
        ty: Ty,
        value: Operand,
        addr: Operand,
    },
    /// Reserve `size` bytes on the stack.
    Alloca {
        size: u64,
    },
    Call {
        callee: String,
        ret: Option<Ty>,
        args: Vec<(Ty, Operand)>,
    },
}

impl Op {
    /// The type of the value this instruction defines, if any.
    pub fn result_ty(&self) -> Option<Ty> {
        match self {
            Op::Bin { ty, .. } => Some(*ty),
            Op::Icmp { .. } => Some(Ty::Int(1)),
            Op::Cast { to, .. } => Some(*to),
            Op::Select { ty, .. } => Some(*ty),
            Op::Gep { .. } | Op::Alloca { .. } => Some(Ty::Addr),
            Op::Load { ty, .. } => Some(*ty),
            Op::Store { .. } => None,
            Op::Call { ret, .. } => *ret,
        }
    }

    /// Operands in textual order.
    pub fn operands(&self) -> Vec<&Operand> {
        match self {
            Op::Bin { lhs, rhs, .. } | Op::Icmp { lhs, rhs, .. } => vec![lhs, rhs],
            Op::Cast { value, .. } => vec![value],
            Op::Select {
                cond,
                on_true,
                on_false,
                ..
            } => vec![cond, on_true, on_false],
            Op::Gep { base, index, .. } => vec![base, index],
            Op::Load { addr, .. } => vec![addr],
            Op::Store { value, addr, .. } => vec![value, addr],
            Op::Alloca { .. } => vec![],
            Op::Call { args, .. } => args.iter().map(|(_, a)| a).collect(),
        }
    }

    pub fn operands_mut(&mut self) -> Vec<&mut Operand> {
        match self {
            Op::Bin { lhs, rhs, .. } | Op::Icmp { lhs, rhs, .. } => vec![lhs, rhs],
            Op::Cast { value, .. } => vec![value],
            Op::Select {
                cond,
                on_true,
                on_false,
                ..
            } => vec![cond, on_true, on_false],
            Op::Gep { base, index, .. } => vec![base, index],
            Op::Load { addr, .. } => vec![addr],
            Op::Store { value, addr, .. } => vec![value, addr],
            Op::Alloca { .. } => vec![],
            Op::Call { args, .. } => args.iter_mut().map(|(_, a)| a).collect(),
        }
    }

    pub fn mnemonic(&self) -> &'static str {
        match self {
            Op::Bin { op, .. } => op.mnemonic(),
            Op::Icmp { .. } => "icmp",
            Op::Cast { op, .. } => op.mnemonic(),
            Op::Select { .. } => "select",
            Op::Gep { .. } => "getelementptr",
            Op::Load { .. } => "load",
            Op::Store { .. } => "store",
            Op::Alloca { .. } => "alloca",
            Op::Call { .. } => "call",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub result: Option<String>,
    pub op: Op,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phi {
    pub result: String,
    pub ty: Ty,
    /// `(value, predecessor label)` pairs in source order.
    pub incoming: Vec<(Operand, String)>,
    pub pos: Pos,
}

impl Phi {
    pub fn incoming_from(&self, pred: &str) -> Option<&Operand> {
        self.incoming
            .iter()
            .find(|(_, label)| label == pred)
            .map(|(v, _)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Terminator {
    Br(String),
    CondBr {
        cond: Operand,
        on_true: String,
        on_false: String,
    },
    Ret(Option<(Ty, Operand)>),
}

impl Terminator {
    pub fn successors(&self) -> Vec<&str> {
        match self {
            Terminator::Br(t) => vec![t.as_str()],
            Terminator::CondBr {
                on_true, on_false, ..
            } => vec![on_true.as_str(), on_false.as_str()],
            Terminator::Ret(_) => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    /// Explicit label, or the implicit number LLVM assigns to an unlabelled
    /// block.
    pub label: String,
    pub phis: Vec<Phi>,
    pub body: Vec<Instruction>,
    pub terminator: Terminator,
    pub term_pos: Pos,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: Ty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlvmFunction {
    pub name: String,
    /// `None` for `void`.
    pub ret: Option<Ty>,
    pub params: Vec<Param>,
    pub blocks: Vec<BasicBlock>,
    pub pos: Pos,
}

impl LlvmFunction {
    pub fn block(&self, label: &str) -> Option<&BasicBlock> {
        self.blocks.iter().find(|b| b.label == label)
    }

    /// Type of every register: formal parameters, phi results, and
    /// instruction results.
    pub fn register_types(&self) -> BTreeMap<String, Ty> {
        let mut types = BTreeMap::new();
        for p in &self.params {
            types.insert(p.name.clone(), p.ty);
        }
        for b in &self.blocks {
            for phi in &b.phis {
                types.insert(phi.result.clone(), phi.ty);
            }
            for inst in &b.body {
                if let (Some(r), Some(ty)) = (&inst.result, inst.op.result_ty()) {
                    types.insert(r.clone(), ty);
                }
            }
        }
        types
    }

    pub fn instruction_count(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.phis.len() + b.body.len() + 1)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alias {
    pub name: String,
    pub target: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LlvmModule {
    pub functions: Vec<LlvmFunction>,
    /// Global aliases in source order. Empty after alias resolution.
    pub aliases: Vec<Alias>,
    /// Names of external declarations (`declare ...`).
    pub declarations: Vec<String>,
    /// `target`/`source_filename` lines, retained verbatim.
    pub target_notes: Vec<String>,
}

impl LlvmModule {
    pub fn function(&self, name: &str) -> Option<&LlvmFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// A copy with every source position zeroed, for structural comparison.
    pub fn without_positions(&self) -> LlvmModule {
        let mut m = self.clone();
        for a in &mut m.aliases {
            a.pos = Pos::default();
        }
        for f in &mut m.functions {
            f.pos = Pos::default();
            for b in &mut f.blocks {
                b.pos = Pos::default();
                b.term_pos = Pos::default();
                for phi in &mut b.phis {
                    phi.pos = Pos::default();
                }
                for inst in &mut b.body {
                    inst.pos = Pos::default();
                }
            }
        }
        m
    }
}
