//! Executing functional programs on concrete machine states.
//!
//! Definitions are compiled to slot-addressed trees. Tail calls run on a
//! trampoline, so a `_while` definition iterating any number of times uses
//! constant host stack.

pub mod compile;
pub mod prim;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

pub use compile::{compile_program, CompileError, CompiledDef};
pub use prim::{apply_pure, bits, signed, word_from_bytes, PrimFault};

use crate::fun::{FunProgram, Kind, PrimOp};
use crate::state::{MachineState, StateFault};
use compile::{Node, StateArg};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Nat(u128),
    State(Box<MachineState>),
    Bytes(Vec<u8>),
    /// Results of an `mvlist`.
    Multi(Vec<Value>),
    /// A slot whose value has been moved out or not yet bound.
    Empty,
}

impl Value {
    pub fn state(st: MachineState) -> Value {
        Value::State(Box::new(st))
    }

    fn describe(&self) -> &'static str {
        match self {
            Value::Nat(_) => "a natural",
            Value::State(_) => "a state",
            Value::Bytes(_) => "a byte run",
            Value::Multi(_) => "multiple values",
            Value::Empty => "nothing",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nat(n) => write!(f, "{n}"),
            Value::State(st) => write!(f, "{st}"),
            Value::Bytes(b) => write!(f, "<bytes {b:?}>"),
            Value::Multi(vs) => {
                f.write_str("(mvlist")?;
                for v in vs {
                    write!(f, " {v}")?;
                }
                f.write_str(")")
            }
            Value::Empty => f.write_str("<empty>"),
        }
    }
}

/// Iterations of each general-recursive definition that ran.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IterationCounts(pub BTreeMap<String, u64>);

impl IterationCounts {
    pub fn get(&self, def: &str) -> u64 {
        self.0.get(def).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }
}

impl fmt::Display for IterationCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(d, n)| format!("{d}={n}")).collect();
        f.write_str(&parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalErrorKind {
    #[error("no definition named `{0}`")]
    UnknownDef(String),
    #[error("{0}")]
    Compile(#[from] CompileError),
    #[error("expected {expected} arguments, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("{0}")]
    Signature(String),
    #[error("expected {expected}, found {found}")]
    Type {
        expected: &'static str,
        found: &'static str,
    },
    #[error("{0}")]
    Prim(#[from] PrimFault),
    #[error("{0}")]
    State(#[from] StateFault),
    #[error("step budget of {budget} exhausted; iterations: {counts}")]
    Budget {
        budget: u64,
        counts: IterationCounts,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("in `{def}` after {steps} steps: {kind}")]
pub struct EvalError {
    pub def: String,
    /// Loop iterations completed before the error.
    pub steps: u64,
    pub kind: EvalErrorKind,
}

impl EvalError {
    pub fn is_budget(&self) -> bool {
        matches!(self.kind, EvalErrorKind::Budget { .. })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Stats {
    pub iterations: IterationCounts,
    /// Definition entries, tail calls included.
    pub calls: u64,
    /// Deepest nesting of non-tail calls.
    pub max_depth: usize,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub value: Value,
    pub stats: Stats,
}

/// A compiled program.
#[derive(Debug, Clone)]
pub struct Program {
    defs: Vec<CompiledDef>,
    index: BTreeMap<String, u32>,
}

impl Program {
    pub fn compile(p: &FunProgram) -> Result<Program, CompileError> {
        let defs = compile_program(p)?;
        let index = defs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.name.clone(), i as u32))
            .collect();
        Ok(Program { defs, index })
    }

    pub fn def(&self, name: &str) -> Option<&CompiledDef> {
        self.index.get(name).map(|&i| &self.defs[i as usize])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub check_signatures: bool,
    /// Maximum total loop iterations.
    pub budget: Option<u64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            check_signatures: true,
            budget: None,
        }
    }
}

enum Flow {
    Done(Value),
    Tail(u32, Vec<Value>),
}

type Fail = Box<(u32, EvalErrorKind)>;

fn fail(def: u32, kind: EvalErrorKind) -> Fail {
    Box::new((def, kind))
}

struct Machine<'p, 'm, 'w> {
    prog: &'p Program,
    opts: EvalOptions,
    trace: Option<&'m mut (dyn Write + 'w)>,
    steps: u64,
    counts: Vec<u64>,
    calls: u64,
    depth: usize,
    max_depth: usize,
}

fn admits(k: Kind, v: &Value) -> bool {
    match (k, v) {
        (Kind::State, Value::State(_)) => true,
        (Kind::State, _) => false,
        (k, Value::Nat(n)) => k.admits(*n),
        _ => false,
    }
}

impl Machine<'_, '_, '_> {
    fn take(env: &mut [Value], s: u32) -> Value {
        std::mem::replace(&mut env[s as usize], Value::Empty)
    }

    fn check_args(&self, d: &CompiledDef, args: &[Value]) -> Result<(), EvalErrorKind> {
        for (i, ((name, k), v)) in d.params.iter().zip(args).enumerate() {
            if !admits(*k, v) {
                return Err(EvalErrorKind::Signature(format!(
                    "argument {} (`{name}`) = {v} does not satisfy {k}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    fn check_result(&self, d: &CompiledDef, v: &Value) -> Result<(), EvalErrorKind> {
        let bad = |what: String| Err(EvalErrorKind::Signature(what));
        match (&d.results[..], v) {
            ([k], v) if admits(*k, v) => Ok(()),
            ([k], v) => bad(format!("result {v} does not satisfy {k}")),
            (ks, Value::Multi(vs)) if ks.len() == vs.len() => {
                for (i, (k, v)) in ks.iter().zip(vs).enumerate() {
                    if !admits(*k, v) {
                        return bad(format!("result {} = {v} does not satisfy {k}", i + 1));
                    }
                }
                Ok(())
            }
            (ks, v) => bad(format!("expected {} results, found {v}", ks.len())),
        }
    }

    fn trace_line(&mut self, line: std::fmt::Arguments<'_>) {
        if let Some(w) = self.trace.as_mut() {
            let _ = writeln!(
                w,
                "{:indent$}{line}",
                "",
                indent = 2 * self.depth.saturating_sub(1)
            );
        }
    }

    fn call(&mut self, mut def: u32, mut env: Vec<Value>) -> Result<Value, Fail> {
        self.depth += 1;
        self.max_depth = self.max_depth.max(self.depth);
        loop {
            self.calls += 1;
            let d = &self.prog.defs[def as usize];
            if self.opts.check_signatures {
                self.check_args(d, &env).map_err(|k| fail(def, k))?;
            }
            if self.trace.is_some() {
                let args: Vec<String> = env.iter().map(Value::to_string).collect();
                self.trace_line(format_args!("> {} {}", d.name, args.join(" ")));
            }
            env.resize(d.slots, Value::Empty);
            match self.tail(def, &d.body, &mut env)? {
                Flow::Done(v) => {
                    if self.opts.check_signatures {
                        self.check_result(d, &v).map_err(|k| fail(def, k))?;
                    }
                    self.trace_line(format_args!("< {} {v}", d.name));
                    self.depth -= 1;
                    return Ok(v);
                }
                Flow::Tail(g, args) => {
                    if g == def && d.general {
                        if let Some(b) = self.opts.budget {
                            if self.steps >= b {
                                return Err(fail(
                                    def,
                                    EvalErrorKind::Budget {
                                        budget: b,
                                        counts: self.counts(),
                                    },
                                ));
                            }
                        }
                        self.steps += 1;
                        self.counts[def as usize] += 1;
                    }
                    def = g;
                    env = args;
                }
            }
        }
    }

    fn counts(&self) -> IterationCounts {
        IterationCounts(
            self.prog
                .defs
                .iter()
                .zip(&self.counts)
                .filter(|(d, _)| d.general)
                .map(|(d, n)| (d.name.clone(), *n))
                .collect(),
        )
    }

    fn args(
        &mut self,
        def: u32,
        callee: u32,
        args: &[Node],
        env: &mut [Value],
    ) -> Result<Vec<Value>, Fail> {
        let mut out = Vec::with_capacity(self.prog.defs[callee as usize].slots);
        for a in args.iter() {
            out.push(self.eval(def, a, env)?);
        }
        Ok(out)
    }

    fn tail(&mut self, def: u32, mut n: &Node, env: &mut [Value]) -> Result<Flow, Fail> {
        loop {
            match n {
                Node::If(c, t, f) => {
                    n = if self.nat(def, c, env)? != 0 { t } else { f };
                }
                Node::Let(s, v, body) => {
                    env[*s as usize] = self.eval(def, v, env)?;
                    n = body;
                }
                Node::MetList(slots, bound, body) => {
                    self.bind_multi(def, slots, bound, env)?;
                    n = body;
                }
                Node::Call {
                    def: g,
                    args,
                    tail: true,
                } => {
                    let args = self.args(def, *g, args, env)?;
                    return Ok(Flow::Tail(*g, args));
                }
                _ => return Ok(Flow::Done(self.eval(def, n, env)?)),
            }
        }
    }

    fn bind_multi(
        &mut self,
        def: u32,
        slots: &[u32],
        bound: &Node,
        env: &mut [Value],
    ) -> Result<(), Fail> {
        match self.eval(def, bound, env)? {
            Value::Multi(vs) if vs.len() == slots.len() => {
                for (s, v) in slots.iter().zip(vs) {
                    env[*s as usize] = v;
                }
                Ok(())
            }
            v => Err(fail(
                def,
                EvalErrorKind::Type {
                    expected: "multiple values",
                    found: v.describe(),
                },
            )),
        }
    }

    fn state_ref<'e>(
        &mut self,
        def: u32,
        a: &StateArg,
        env: &'e mut [Value],
        tmp: &'e mut Value,
    ) -> Result<&'e MachineState, Fail> {
        let v: &Value = match a {
            StateArg::Slot(s) => &env[*s as usize],
            StateArg::Node(n) => {
                *tmp = self.eval(def, n, env)?;
                tmp
            }
        };
        match v {
            Value::State(st) => Ok(st),
            v => Err(fail(
                def,
                EvalErrorKind::Type {
                    expected: "a state",
                    found: v.describe(),
                },
            )),
        }
    }

    fn expect_nat(def: u32, v: Value) -> Result<u128, Fail> {
        match v {
            Value::Nat(n) => Ok(n),
            v => Err(fail(
                def,
                EvalErrorKind::Type {
                    expected: "a natural",
                    found: v.describe(),
                },
            )),
        }
    }

    fn expect_state(def: u32, v: Value) -> Result<Box<MachineState>, Fail> {
        match v {
            Value::State(st) => Ok(st),
            v => Err(fail(
                def,
                EvalErrorKind::Type {
                    expected: "a state",
                    found: v.describe(),
                },
            )),
        }
    }

    /// Evaluate a node that must produce a natural.
    fn nat(&mut self, def: u32, n: &Node, env: &mut [Value]) -> Result<u128, Fail> {
        match n {
            Node::Const(c) => Ok(*c),
            Node::Copy(s) | Node::Move(s) => match &env[*s as usize] {
                Value::Nat(v) => Ok(*v),
                v => Err(fail(
                    def,
                    EvalErrorKind::Type {
                        expected: "a natural",
                        found: v.describe(),
                    },
                )),
            },
            Node::Prim(op, args) if op.state_arg().is_none() && *op != PrimOp::WFromBytes => {
                let mut a = [0u128; 4];
                for (i, x) in args.iter().enumerate() {
                    a[i] = self.nat(def, x, env)?;
                }
                apply_pure(*op, &a[..args.len()]).map_err(|e| fail(def, e.into()))
            }
            Node::LoadWord(k, p, st) => {
                let k = self.nat(def, k, env)?;
                let p = self.nat(def, p, env)?;
                let mut tmp = Value::Empty;
                let st = self.state_ref(def, st, env, &mut tmp)?;
                st.load_word(k, p).map_err(|e| fail(def, e.into()))
            }
            n => {
                let v = self.eval(def, n, env)?;
                Self::expect_nat(def, v)
            }
        }
    }

    fn eval(&mut self, def: u32, n: &Node, env: &mut [Value]) -> Result<Value, Fail> {
        Ok(match n {
            Node::Const(c) => Value::Nat(*c),
            Node::Copy(s) => match &env[*s as usize] {
                Value::Nat(v) => Value::Nat(*v),
                v => v.clone(),
            },
            Node::Move(s) => Self::take(env, *s),
            Node::LoadWord(..) => Value::Nat(self.nat(def, n, env)?),
            Node::Prim(op, args) => self.prim(def, *op, args, env)?,
            Node::Read(op, args, st) => {
                let mut a = [0u128; 2];
                for (i, x) in args.iter().enumerate() {
                    a[i] = self.nat(def, x, env)?;
                }
                let mut tmp = Value::Empty;
                let st = self.state_ref(def, st, env, &mut tmp)?;
                match op {
                    PrimOp::LoadBytes => {
                        Value::Bytes(st.load_bytes(a[0], a[1]).map_err(|e| fail(def, e.into()))?)
                    }
                    PrimOp::Retval => Value::Nat(st.retval),
                    PrimOp::Stack => Value::Nat(st.stack as u128),
                    _ => unreachable!("only state readers are compiled to Read"),
                }
            }
            Node::Call { def: g, args, .. } => {
                let args = self.args(def, *g, args, env)?;
                self.call(*g, args)?
            }
            Node::If(c, t, f) => {
                if self.nat(def, c, env)? != 0 {
                    self.eval(def, t, env)?
                } else {
                    self.eval(def, f, env)?
                }
            }
            Node::Let(s, v, body) => {
                env[*s as usize] = self.eval(def, v, env)?;
                self.eval(def, body, env)?
            }
            Node::MvList(xs) => {
                let mut vs = Vec::with_capacity(xs.len());
                for x in xs.iter() {
                    vs.push(self.eval(def, x, env)?);
                }
                Value::Multi(vs)
            }
            Node::MetList(slots, bound, body) => {
                self.bind_multi(def, slots, bound, env)?;
                self.eval(def, body, env)?
            }
        })
    }

    fn prim(
        &mut self,
        def: u32,
        op: PrimOp,
        args: &[Node],
        env: &mut [Value],
    ) -> Result<Value, Fail> {
        let fault = |e: StateFault| fail(def, EvalErrorKind::State(e));
        Ok(match op {
            PrimOp::WFromBytes => {
                let n = self.nat(def, &args[0], env)?;
                match self.eval(def, &args[1], env)? {
                    Value::Bytes(b) if b.len() as u128 == n => Value::Nat(word_from_bytes(&b)),
                    Value::Bytes(b) => {
                        return Err(fail(
                            def,
                            EvalErrorKind::Signature(format!(
                                "wfrombytes of {n} bytes given {} bytes",
                                b.len()
                            )),
                        ))
                    }
                    v => {
                        return Err(fail(
                            def,
                            EvalErrorKind::Type {
                                expected: "a byte run",
                                found: v.describe(),
                            },
                        ))
                    }
                }
            }
            PrimOp::StoreBytes => {
                let n = self.nat(def, &args[0], env)?;
                let p = self.nat(def, &args[1], env)?;
                let v = self.nat(def, &args[2], env)?;
                let s = self.eval(def, &args[3], env)?;
                let mut st = Self::expect_state(def, s)?;
                st.store_bytes(n, p, v).map_err(fault)?;
                Value::State(st)
            }
            PrimOp::UpdateRetval | PrimOp::Alloca => {
                let v = self.nat(def, &args[0], env)?;
                let s = self.eval(def, &args[1], env)?;
                let mut st = Self::expect_state(def, s)?;
                if op == PrimOp::UpdateRetval {
                    st.update_retval(v);
                } else {
                    st.alloca(v).map_err(fault)?;
                }
                Value::State(st)
            }
            PrimOp::InitStackFrame | PrimOp::BeginStackFrame | PrimOp::EndStackFrame => {
                let s = self.eval(def, &args[0], env)?;
                let mut st = Self::expect_state(def, s)?;
                match op {
                    PrimOp::InitStackFrame => st.init_stack_frame(),
                    PrimOp::BeginStackFrame => st.begin_stack_frame(),
                    _ => st.end_stack_frame().map_err(fault)?,
                }
                Value::State(st)
            }
            PrimOp::LoadBytes | PrimOp::Retval | PrimOp::Stack => {
                unreachable!("state readers are compiled to Read")
            }
            _ => {
                let mut a = [0u128; 4];
                for (i, x) in args.iter().enumerate() {
                    a[i] = self.nat(def, x, env)?;
                }
                Value::Nat(apply_pure(op, &a[..args.len()]).map_err(|e| fail(def, e.into()))?)
            }
        })
    }
}

/// Runs definitions of a compiled program.
pub struct Evaluator<'p, 'w> {
    program: &'p Program,
    options: EvalOptions,
    trace: Option<&'w mut dyn Write>,
}

impl<'p, 'w> Evaluator<'p, 'w> {
    pub fn new(program: &'p Program) -> Self {
        Evaluator {
            program,
            options: EvalOptions::default(),
            trace: None,
        }
    }

    pub fn options(mut self, options: EvalOptions) -> Self {
        self.options = options;
        self
    }

    pub fn check_signatures(mut self, on: bool) -> Self {
        self.options.check_signatures = on;
        self
    }

    pub fn budget(mut self, budget: Option<u64>) -> Self {
        self.options.budget = budget;
        self
    }

    /// Write one line per definition entry and exit.
    pub fn trace(mut self, out: &'w mut dyn Write) -> Self {
        self.trace = Some(out);
        self
    }

    /// Evaluate `name` on `args`, which include the state.
    pub fn eval_def(&mut self, name: &str, args: Vec<Value>) -> Result<Outcome, EvalError> {
        let Some(&def) = self.program.index.get(name) else {
            return Err(EvalError {
                def: name.to_string(),
                steps: 0,
                kind: EvalErrorKind::UnknownDef(name.to_string()),
            });
        };
        let d = &self.program.defs[def as usize];
        if args.len() != d.params.len() {
            return Err(EvalError {
                def: name.to_string(),
                steps: 0,
                kind: EvalErrorKind::Arity {
                    expected: d.params.len(),
                    found: args.len(),
                },
            });
        }
        let mut m = Machine {
            prog: self.program,
            opts: self.options,
            trace: self.trace.as_deref_mut(),
            steps: 0,
            counts: vec![0; self.program.defs.len()],
            calls: 0,
            depth: 0,
            max_depth: 0,
        };
        match m.call(def, args) {
            Ok(value) => Ok(Outcome {
                value,
                stats: Stats {
                    iterations: m.counts(),
                    calls: m.calls,
                    max_depth: m.max_depth,
                },
            }),
            Err(e) => {
                let (at, kind) = *e;
                Err(EvalError {
                    def: self.program.defs[at as usize].name.clone(),
                    steps: m.steps,
                    kind,
                })
            }
        }
    }

    /// Run a translated function: `args` are its natural parameters, and
    /// the state is appended. Returns the final state.
    pub fn run(
        &mut self,
        name: &str,
        args: &[u128],
        st: MachineState,
    ) -> Result<(MachineState, Stats), EvalError> {
        let mut vals: Vec<Value> = args.iter().map(|a| Value::Nat(*a)).collect();
        vals.push(Value::state(st));
        let out = self.eval_def(name, vals)?;
        match out.value {
            Value::State(st) => Ok((*st, out.stats)),
            v => Err(EvalError {
                def: name.to_string(),
                steps: out.stats.iterations.total(),
                kind: EvalErrorKind::Type {
                    expected: "a state",
                    found: v.describe(),
                },
            }),
        }
    }
}
