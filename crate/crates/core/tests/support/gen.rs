//! Random straight-line and single-loop functions in the supported subset.

use rand::seq::SliceRandom;
use rand::Rng;

/// Base address window for the generated pointer argument.
pub const PTR_LO: u64 = 0x1000;
pub const PTR_HI: u64 = 0x1800;
/// Memory that generated programs may touch.
pub const MEM_LO: u64 = 0x0400;
pub const MEM_HI: u64 = 0x2000;

const WIDTHS: [u8; 4] = [8, 16, 32, 64];

#[derive(Clone, Debug)]
struct Reg {
    name: String,
    w: u8,
}

/// Registers visible at a point, by width (1 for `i1`).
#[derive(Clone, Debug, Default)]
struct Pool {
    regs: Vec<Reg>,
}

impl Pool {
    fn add(&mut self, name: &str, w: u8) {
        self.regs.push(Reg {
            name: name.into(),
            w,
        });
    }

    fn of(&self, w: u8) -> Vec<&Reg> {
        self.regs.iter().filter(|r| r.w == w).collect()
    }
}

pub struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    next: usize,
    lines: Vec<String>,
}

impl<'r, R: Rng> Gen<'r, R> {
    pub fn new(rng: &'r mut R) -> Self {
        Gen {
            rng,
            next: 0,
            lines: Vec::new(),
        }
    }

    fn fresh(&mut self, stem: &str) -> String {
        self.next += 1;
        format!("%{stem}{}", self.next)
    }

    fn emit(&mut self, line: String) {
        self.lines.push(format!("  {line}"));
    }

    fn label(&mut self, l: &str) {
        self.lines.push(format!("{l}:"));
    }

    fn constant(&mut self, w: u8) -> String {
        if w == 1 {
            return self.rng.gen_range(0..2u8).to_string();
        }
        let m = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
        match self.rng.gen_range(0..6) {
            0 => "0".into(),
            1 => "1".into(),
            2 => format!("-{}", self.rng.gen_range(1..=4u64)),
            3 => self.rng.gen_range(0..w as u64 + 2).to_string(),
            _ => (self.rng.gen::<u64>() & m).to_string(),
        }
    }

    fn operand(&mut self, pool: &Pool, w: u8) -> String {
        let regs = pool.of(w);
        if regs.is_empty() || self.rng.gen_bool(0.2) {
            self.constant(w)
        } else {
            regs.choose(self.rng).expect("nonempty").name.clone()
        }
    }

    fn width(&mut self) -> u8 {
        *WIDTHS.choose(self.rng).expect("nonempty")
    }

    /// An address `%ptr + idx * w/8` with `idx` in `-16..16`.
    fn address(&mut self, pool: &mut Pool, w: u8) -> String {
        let iw = *[8u8, 32, 64].choose(self.rng).expect("nonempty");
        let x = self.operand(pool, iw);
        let idx = self.fresh("ix");
        if self.rng.gen_bool(0.3) {
            self.emit(format!("{idx} = or i{iw} {x}, -16"));
        } else {
            self.emit(format!("{idx} = and i{iw} {x}, 15"));
        }
        let p = self.fresh("p");
        self.emit(format!(
            "{p} = getelementptr inbounds i{w}, ptr %ptr, i{iw} {idx}"
        ));
        pool.add(&idx, iw);
        p
    }

    /// One random instruction using and extending `pool`.
    fn instruction(&mut self, pool: &mut Pool) {
        match self.rng.gen_range(0..12) {
            0..=3 => {
                let w = self.width();
                let op = *[
                    "add", "sub", "mul", "and", "or", "xor", "shl", "lshr", "ashr",
                ]
                .choose(self.rng)
                .expect("nonempty");
                let (a, b) = (self.operand(pool, w), self.operand(pool, w));
                let r = self.fresh("v");
                let flags = if op == "add" && self.rng.gen_bool(0.3) {
                    " nsw"
                } else {
                    ""
                };
                self.emit(format!("{r} = {op}{flags} i{w} {a}, {b}"));
                pool.add(&r, w);
            }
            4 => {
                let w = self.width();
                let pred = *[
                    "eq", "ne", "ugt", "uge", "ult", "ule", "sgt", "sge", "slt", "sle",
                ]
                .choose(self.rng)
                .expect("nonempty");
                let (a, b) = (self.operand(pool, w), self.operand(pool, w));
                let r = self.fresh("c");
                self.emit(format!("{r} = icmp {pred} i{w} {a}, {b}"));
                pool.add(&r, 1);
            }
            5 => {
                let w = self.width();
                let c = self.operand(pool, 1);
                let (a, b) = (self.operand(pool, w), self.operand(pool, w));
                let r = self.fresh("s");
                self.emit(format!("{r} = select i1 {c}, i{w} {a}, i{w} {b}"));
                pool.add(&r, w);
            }
            6 | 7 => {
                let mut from = *[1u8, 8, 16, 32, 64].choose(self.rng).expect("nonempty");
                let to = self.width();
                if from == to {
                    from = 1;
                }
                let op = if from < to {
                    if self.rng.gen_bool(0.5) {
                        "zext"
                    } else {
                        "sext"
                    }
                } else {
                    "trunc"
                };
                let x = self.operand(pool, from);
                let r = self.fresh("x");
                self.emit(format!("{r} = {op} i{from} {x} to i{to}"));
                pool.add(&r, to);
            }
            8 | 9 => {
                let w = self.width();
                let p = self.address(pool, w);
                let r = self.fresh("l");
                self.emit(format!("{r} = load i{w}, ptr {p}, align 1"));
                pool.add(&r, w);
            }
            _ => {
                let w = self.width();
                let p = self.address(pool, w);
                let v = self.operand(pool, w);
                self.emit(format!("store i{w} {v}, ptr {p}, align 1"));
            }
        }
    }

    fn params(&self) -> (String, Pool) {
        let mut pool = Pool::default();
        pool.add("%a", 64);
        pool.add("%b", 32);
        pool.add("%c", 16);
        pool.add("%d", 8);
        ("i64 %a, i32 %b, i16 %c, i8 %d, ptr %ptr".into(), pool)
    }

    fn ret(&mut self, pool: &mut Pool) {
        let w = self.width();
        let x = self.operand(pool, w);
        let r = if w == 64 {
            x
        } else {
            let r = self.fresh("ret");
            self.emit(format!("{r} = zext i{w} {x} to i64"));
            r
        };
        self.emit(format!("ret i64 {r}"));
    }

    fn finish(self, params: &str) -> String {
        format!(
            "define i64 @f({params}) {{\n{}\n}}\n",
            self.lines.join("\n")
        )
    }

    pub fn straight_line(mut self) -> String {
        let (params, mut pool) = self.params();
        self.label("entry");
        let n = self.rng.gen_range(1..24);
        for _ in 0..n {
            self.instruction(&mut pool);
        }
        self.ret(&mut pool);
        self.finish(&params)
    }

    /// A counted loop running `(b & 15) + 1` times, in one of four shapes:
    /// entered unconditionally or guarded, one block or two, and tested at
    /// the top or the bottom.
    pub fn single_loop(mut self) -> String {
        let (params, mut pool) = self.params();
        let guarded = self.rng.gen_bool(0.5);
        let shape = self.rng.gen_range(0..3);
        self.label("entry");
        for _ in 0..self.rng.gen_range(0..4) {
            self.instruction(&mut pool);
        }
        self.emit("%k0 = and i32 %b, 15".into());
        self.emit("%k = add i32 %k0, 1".into());
        let acc_init = self.operand(&pool, 64);
        if guarded {
            self.emit("%skip = icmp eq i32 %b, 7".into());
            self.emit("br i1 %skip, label %exit, label %loop".into());
        } else {
            self.emit("br label %loop".into());
        }
        pool.add("%k", 32);
        let outer = pool.clone();

        // Loop-carried registers: the counter and an accumulator.
        let latch = if shape == 0 { "loop" } else { "body" };
        self.label("loop");
        self.emit(format!("%i = phi i32 [ 0, %entry ], [ %i.next, %{latch} ]"));
        self.emit(format!(
            "%acc = phi i64 [ {acc_init}, %entry ], [ %acc.next, %{latch} ]"
        ));
        let mut inner = outer.clone();
        inner.add("%i", 32);
        inner.add("%acc", 64);
        let (exiting, header) = match shape {
            0 => {
                for _ in 0..self.rng.gen_range(0..8) {
                    self.instruction(&mut inner);
                }
                self.step(&mut inner);
                self.emit("%done = icmp eq i32 %i.next, %k".into());
                self.emit("br i1 %done, label %exit, label %loop".into());
                ("loop", inner)
            }
            1 => {
                for _ in 0..self.rng.gen_range(0..4) {
                    self.instruction(&mut inner);
                }
                self.emit("%done = icmp eq i32 %i, %k".into());
                self.emit("br i1 %done, label %exit, label %body".into());
                let header = inner.clone();
                self.label("body");
                for _ in 0..self.rng.gen_range(0..6) {
                    self.instruction(&mut inner);
                }
                self.step(&mut inner);
                self.emit("br label %loop".into());
                ("loop", header)
            }
            _ => {
                for _ in 0..self.rng.gen_range(0..4) {
                    self.instruction(&mut inner);
                }
                self.emit("br label %body".into());
                self.label("body");
                for _ in 0..self.rng.gen_range(0..6) {
                    self.instruction(&mut inner);
                }
                self.step(&mut inner);
                self.emit("%done = icmp eq i32 %i.next, %k".into());
                self.emit("br i1 %done, label %exit, label %loop".into());
                ("body", inner)
            }
        };

        self.label("exit");
        let leaving = if shape == 1 { "%acc" } else { "%acc.next" };
        let mut after = outer;
        if guarded {
            let from_entry = self.constant(64);
            self.emit(format!(
                "%out = phi i64 [ {from_entry}, %entry ], [ {leaving}, %{exiting} ]"
            ));
        } else {
            self.emit(format!("%out = phi i64 [ {leaving}, %{exiting} ]"));
            // Without the guard every loop value that dominates the exit
            // may be used there directly.
            after = header;
        }
        after.add("%out", 64);
        for _ in 0..self.rng.gen_range(0..4) {
            self.instruction(&mut after);
        }
        self.ret(&mut after);
        self.finish(&params)
    }

    fn step(&mut self, pool: &mut Pool) {
        let x = self.operand(pool, 64);
        let op = *["add", "xor", "mul", "sub"]
            .choose(self.rng)
            .expect("nonempty");
        self.emit(format!("%acc.next = {op} i64 %acc, {x}"));
        self.emit("%i.next = add i32 %i, 1".into());
        pool.add("%acc.next", 64);
        pool.add("%i.next", 32);
    }
}

/// Random arguments for `@f` and a state whose memory around the pointer
/// argument is filled with random bytes.
pub fn random_inputs(rng: &mut impl Rng) -> (Vec<u128>, ll2fun::MachineState) {
    let ptr = rng.gen_range(PTR_LO..PTR_HI);
    let args = vec![
        rng.gen::<u64>() as u128,
        rng.gen::<u32>() as u128,
        rng.gen::<u16>() as u128,
        rng.gen::<u8>() as u128,
        ptr as u128,
    ];
    let mut st = ll2fun::MachineState::default();
    for a in MEM_LO..MEM_HI {
        if rng.gen_bool(0.3) {
            st.mem.set_byte(a as u32, rng.gen());
        }
    }
    (args, st)
}
