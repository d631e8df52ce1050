//! The functional target form.

use std::fmt;

/// The kind of a parameter or result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    /// A natural below `2^w`.
    Int(u8),
    /// A natural below `2^32`.
    Addr,
    /// Any natural.
    Nat,
    State,
}

impl Kind {
    pub fn predicate(self) -> String {
        match self {
            Kind::Int(w) => format!("i{w}_p"),
            Kind::Addr => "addr_p".to_string(),
            Kind::Nat => "natp".to_string(),
            Kind::State => "stp".to_string(),
        }
    }

    pub fn from_predicate(s: &str) -> Option<Kind> {
        match s {
            "addr_p" => Some(Kind::Addr),
            "natp" => Some(Kind::Nat),
            "stp" => Some(Kind::State),
            _ => {
                let w: u8 = s.strip_prefix('i')?.strip_suffix("_p")?.parse().ok()?;
                (1..=64).contains(&w).then_some(Kind::Int(w))
            }
        }
    }

    /// Whether a natural value fits this kind. Always false for `State`.
    pub fn admits(self, v: u128) -> bool {
        match self {
            Kind::Int(w) => v >> w == 0,
            Kind::Addr => v >> 32 == 0,
            Kind::Nat => true,
            Kind::State => false,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate())
    }
}

/// Primitive operations. Widths and byte counts are passed as leading
/// constant arguments where an operation needs them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimOp {
    /// `(bits x h l)`
    Bits,
    Add,
    Mul,
    /// `(bvsub w a b)`: `(a + 2^w - b) mod 2^w`.
    BvSub,
    LogAnd,
    LogIor,
    LogXor,
    /// `(bvshl w a s)` and friends; a shift of `w` or more gives 0.
    BvShl,
    BvLshr,
    BvAshr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    /// `(slt w a b)` and friends compare as two's complement at width `w`.
    Slt,
    Sle,
    Sgt,
    Sge,
    /// `(sext from to a)`
    Sext,
    /// `(loadbytes n p st)`: the byte run at `p`.
    LoadBytes,
    /// `(wfrombytes n bytes)`: little-endian assembly.
    WFromBytes,
    /// `(storebytes n p v st)`
    StoreBytes,
    /// `(update-retval v st)`
    UpdateRetval,
    /// `(retval st)`
    Retval,
    /// `(stack st)`
    Stack,
    /// `(alloca k st)`: advance the stack by `k` rounded up to 8.
    Alloca,
    InitStackFrame,
    BeginStackFrame,
    EndStackFrame,
}

impl PrimOp {
    pub const ALL: [PrimOp; 31] = [
        PrimOp::Bits,
        PrimOp::Add,
        PrimOp::Mul,
        PrimOp::BvSub,
        PrimOp::LogAnd,
        PrimOp::LogIor,
        PrimOp::LogXor,
        PrimOp::BvShl,
        PrimOp::BvLshr,
        PrimOp::BvAshr,
        PrimOp::Eq,
        PrimOp::Ne,
        PrimOp::Lt,
        PrimOp::Le,
        PrimOp::Gt,
        PrimOp::Ge,
        PrimOp::Slt,
        PrimOp::Sle,
        PrimOp::Sgt,
        PrimOp::Sge,
        PrimOp::Sext,
        PrimOp::LoadBytes,
        PrimOp::WFromBytes,
        PrimOp::StoreBytes,
        PrimOp::UpdateRetval,
        PrimOp::Retval,
        PrimOp::Stack,
        PrimOp::Alloca,
        PrimOp::InitStackFrame,
        PrimOp::BeginStackFrame,
        PrimOp::EndStackFrame,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrimOp::Bits => "bits",
            PrimOp::Add => "+",
            PrimOp::Mul => "*",
            PrimOp::BvSub => "bvsub",
            PrimOp::LogAnd => "logand",
            PrimOp::LogIor => "logior",
            PrimOp::LogXor => "logxor",
            PrimOp::BvShl => "bvshl",
            PrimOp::BvLshr => "bvlshr",
            PrimOp::BvAshr => "bvashr",
            PrimOp::Eq => "=",
            PrimOp::Ne => "/=",
            PrimOp::Lt => "<",
            PrimOp::Le => "<=",
            PrimOp::Gt => ">",
            PrimOp::Ge => ">=",
            PrimOp::Slt => "slt",
            PrimOp::Sle => "sle",
            PrimOp::Sgt => "sgt",
            PrimOp::Sge => "sge",
            PrimOp::Sext => "sext",
            PrimOp::LoadBytes => "loadbytes",
            PrimOp::WFromBytes => "wfrombytes",
            PrimOp::StoreBytes => "storebytes",
            PrimOp::UpdateRetval => "update-retval",
            PrimOp::Retval => "retval",
            PrimOp::Stack => "stack",
            PrimOp::Alloca => "alloca",
            PrimOp::InitStackFrame => "init-stack-frame",
            PrimOp::BeginStackFrame => "begin-stack-frame",
            PrimOp::EndStackFrame => "end-stack-frame",
        }
    }

    pub fn from_name(s: &str) -> Option<PrimOp> {
        PrimOp::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn arity(self) -> usize {
        match self {
            PrimOp::Retval
            | PrimOp::Stack
            | PrimOp::InitStackFrame
            | PrimOp::BeginStackFrame
            | PrimOp::EndStackFrame => 1,
            PrimOp::Add
            | PrimOp::Mul
            | PrimOp::LogAnd
            | PrimOp::LogIor
            | PrimOp::LogXor
            | PrimOp::Eq
            | PrimOp::Ne
            | PrimOp::Lt
            | PrimOp::Le
            | PrimOp::Gt
            | PrimOp::Ge
            | PrimOp::WFromBytes
            | PrimOp::UpdateRetval
            | PrimOp::Alloca => 2,
            PrimOp::StoreBytes => 4,
            _ => 3,
        }
    }

    /// Argument positions that take the machine state.
    pub fn state_arg(self) -> Option<usize> {
        match self {
            PrimOp::LoadBytes => Some(2),
            PrimOp::StoreBytes => Some(3),
            PrimOp::UpdateRetval | PrimOp::Alloca => Some(1),
            PrimOp::Retval
            | PrimOp::Stack
            | PrimOp::InitStackFrame
            | PrimOp::BeginStackFrame
            | PrimOp::EndStackFrame => Some(0),
            _ => None,
        }
    }

    /// Whether the operation returns a new state.
    pub fn returns_state(self) -> bool {
        matches!(
            self,
            PrimOp::StoreBytes
                | PrimOp::UpdateRetval
                | PrimOp::Alloca
                | PrimOp::InitStackFrame
                | PrimOp::BeginStackFrame
                | PrimOp::EndStackFrame
        )
    }
}

/// Names that cannot be used as definition names.
pub const SPECIAL_FORMS: [&str; 5] = ["let*", "let", "if", "mvlist", "metlist"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Var(String),
    Const(u128),
    Prim(PrimOp, Vec<Expr>),
    Call(String, Vec<Expr>),
    /// Taken when the condition is nonzero.
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    /// Sequential bindings, each visible to the ones after it.
    Let(Vec<(String, Expr)>, Box<Expr>),
    /// Several results packed as one list.
    MvList(Vec<Expr>),
    /// Bind the results of a multi-valued call, then evaluate the body.
    MetList(Vec<String>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn prim(op: PrimOp, args: Vec<Expr>) -> Expr {
        Expr::Prim(op, args)
    }

    pub fn call(name: impl Into<String>, args: Vec<Expr>) -> Expr {
        Expr::Call(name.into(), args)
    }

    pub fn if_(c: Expr, t: Expr, e: Expr) -> Expr {
        Expr::If(Box::new(c), Box::new(t), Box::new(e))
    }

    /// `bindings` wrapped around `body`; no wrapper when there are none.
    pub fn let_(bindings: Vec<(String, Expr)>, body: Expr) -> Expr {
        if bindings.is_empty() {
            body
        } else {
            Expr::Let(bindings, Box::new(body))
        }
    }

    /// `(= e 1)`
    pub fn is_one(e: Expr) -> Expr {
        Expr::Prim(PrimOp::Eq, vec![e, Expr::Const(1)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recursion {
    Plain,
    /// May call itself; admitted without a termination argument.
    General,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunDef {
    pub name: String,
    pub params: Vec<(String, Kind)>,
    pub results: Vec<Kind>,
    pub body: Expr,
    pub recursion: Recursion,
}

impl FunDef {
    pub fn param_kinds(&self) -> Vec<Kind> {
        self.params.iter().map(|(_, k)| *k).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FunProgram {
    /// Callees precede callers.
    pub defs: Vec<FunDef>,
}

impl FunProgram {
    pub fn def(&self, name: &str) -> Option<&FunDef> {
        self.defs.iter().find(|d| d.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.defs.iter().position(|d| d.name == name)
    }
}
