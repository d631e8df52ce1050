//! The machine state: return value, stack and frame addresses, and a sparse
//! little-endian byte memory over 32-bit addresses.
//!
//! Frame discipline: `init-stack-frame` changes nothing; `begin-stack-frame`
//! saves the frame address and sets `frame := stack`; `end-stack-frame` sets
//! `stack := frame` and restores the saved frame. Saved frames live outside
//! memory. `alloca` rounds sizes up to 8 bytes.

use std::collections::BTreeMap;
use std::fmt;

/// Initial stack and frame address used when none is given.
pub const DEFAULT_STACK: u32 = 0xffff_0000;

/// Largest byte count a single read or write may cover.
pub const MAX_ACCESS: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StateFault {
    #[error("access of {n} bytes at {addr:#x} runs past the 32-bit address space")]
    AddressOverflow { addr: u128, n: u32 },
    #[error("access width {0} is outside 1..={MAX_ACCESS}")]
    BadWidth(u128),
    #[error("alloca of {size} bytes at stack {stack:#x} runs past the 32-bit address space")]
    StackOverflow { stack: u32, size: u128 },
    #[error("end-stack-frame without a matching begin-stack-frame")]
    FrameUnderflow,
}

fn check_range(n: u128, addr: u128) -> Result<(u32, u32), StateFault> {
    if n == 0 || n > MAX_ACCESS as u128 {
        return Err(StateFault::BadWidth(n));
    }
    let n = n as u32;
    if addr + n as u128 > 1 << 32 {
        return Err(StateFault::AddressOverflow { addr, n });
    }
    Ok((n, addr as u32))
}

/// Bytes by address; absent bytes read as zero and zero is never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct ByteMemory {
    bytes: BTreeMap<u32, u8>,
}

impl ByteMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn byte(&self, addr: u32) -> u8 {
        self.bytes.get(&addr).copied().unwrap_or(0)
    }

    pub fn set_byte(&mut self, addr: u32, b: u8) {
        if b == 0 {
            self.bytes.remove(&addr);
        } else {
            self.bytes.insert(addr, b);
        }
    }

    /// Little-endian read of `n` bytes.
    pub fn rd_n(&self, n: u128, addr: u128) -> Result<u128, StateFault> {
        let (n, addr) = check_range(n, addr)?;
        let mut v = 0u128;
        for (a, b) in self.bytes.range(addr..=addr + (n - 1)) {
            v |= (*b as u128) << (8 * (a - addr));
        }
        Ok(v)
    }

    /// Little-endian write of `value mod 2^(8n)`.
    pub fn wr_n(&mut self, n: u128, addr: u128, value: u128) -> Result<(), StateFault> {
        let (n, addr) = check_range(n, addr)?;
        for k in 0..n {
            self.set_byte(addr + k, (value >> (8 * k)) as u8);
        }
        Ok(())
    }

    /// The `n` bytes starting at `addr`.
    pub fn read_bytes(&self, n: u128, addr: u128) -> Result<Vec<u8>, StateFault> {
        let (n, addr) = check_range(n, addr)?;
        Ok((0..n).map(|k| self.byte(addr + k)).collect())
    }

    /// Number of nonzero bytes.
    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    /// Stored bytes in address order; all nonzero.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u8)> + '_ {
        self.bytes.iter().map(|(a, b)| (*a, *b))
    }

    /// No zero byte is stored explicitly.
    pub fn is_canonical(&self) -> bool {
        self.bytes.values().all(|b| *b != 0)
    }

    /// Addresses whose byte differs between the two memories.
    pub fn diff(&self, other: &ByteMemory) -> Vec<u32> {
        let mut addrs: Vec<u32> = self
            .bytes
            .keys()
            .chain(other.bytes.keys())
            .copied()
            .filter(|a| self.byte(*a) != other.byte(*a))
            .collect();
        addrs.sort_unstable();
        addrs.dedup();
        addrs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MachineState {
    pub retval: u128,
    pub stack: u32,
    pub frame: u32,
    pub mem: ByteMemory,
    saved_frames: Vec<u32>,
}

impl Default for MachineState {
    fn default() -> Self {
        MachineState::new(DEFAULT_STACK, DEFAULT_STACK)
    }
}

impl MachineState {
    pub fn new(stack: u32, frame: u32) -> Self {
        MachineState {
            retval: 0,
            stack,
            frame,
            mem: ByteMemory::new(),
            saved_frames: Vec::new(),
        }
    }

    pub fn with_memory(mut self, mem: ByteMemory) -> Self {
        self.mem = mem;
        self
    }

    pub fn update_retval(&mut self, v: u128) {
        self.retval = v;
    }

    pub fn load_bytes(&self, n: u128, addr: u128) -> Result<Vec<u8>, StateFault> {
        self.mem.read_bytes(n, addr)
    }

    /// `wfrombytes n (loadbytes n addr st)` in one step.
    pub fn load_word(&self, n: u128, addr: u128) -> Result<u128, StateFault> {
        self.mem.rd_n(n, addr)
    }

    pub fn store_bytes(&mut self, n: u128, addr: u128, value: u128) -> Result<(), StateFault> {
        self.mem.wr_n(n, addr, value)
    }

    /// Reserve `size` bytes, rounded up to 8; returns the old stack address.
    pub fn alloca(&mut self, size: u128) -> Result<u32, StateFault> {
        let rounded = size.checked_add(7).map(|s| s & !7);
        match rounded.and_then(|r| (self.stack as u128).checked_add(r)) {
            Some(top) if top <= u32::MAX as u128 => {
                let old = self.stack;
                self.stack = top as u32;
                Ok(old)
            }
            _ => Err(StateFault::StackOverflow {
                stack: self.stack,
                size,
            }),
        }
    }

    pub fn init_stack_frame(&mut self) {}

    pub fn begin_stack_frame(&mut self) {
        self.saved_frames.push(self.frame);
        self.frame = self.stack;
    }

    pub fn end_stack_frame(&mut self) -> Result<(), StateFault> {
        let saved = self.saved_frames.pop().ok_or(StateFault::FrameUnderflow)?;
        self.stack = self.frame;
        self.frame = saved;
        Ok(())
    }

    /// Number of open `begin-stack-frame` brackets.
    pub fn frame_depth(&self) -> usize {
        self.saved_frames.len()
    }
}

impl fmt::Display for MachineState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(st {} #x{:x} #x{:x} <{} bytes>)",
            self.retval,
            self.stack,
            self.frame,
            self.mem.len()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ImageError {
    pub line: usize,
    pub message: String,
}

/// Decimal, `0x` hex or `#x` hex.
pub fn parse_natural(s: &str) -> Option<u128> {
    if let Some(h) = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .or_else(|| s.strip_prefix("#x"))
    {
        return u128::from_str_radix(h, 16).ok();
    }
    if s.starts_with(|c: char| c.is_ascii_digit()) {
        return s.parse().ok();
    }
    None
}

/// Parse a memory image: lines `w <n> <addr-hex> <value>` applied in order.
/// The address is hexadecimal with or without `0x`; the value is decimal or
/// `0x` hex. `#` starts a comment.
pub fn parse_memory_image(text: &str) -> Result<ByteMemory, ImageError> {
    let mut mem = ByteMemory::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let words: Vec<&str> = raw
            .split_whitespace()
            .take_while(|w| !w.starts_with('#') || w.starts_with("#x"))
            .collect();
        if words.is_empty() {
            continue;
        }
        let content = words.join(" ");
        let err = |message: String| ImageError { line, message };
        let [w, n, addr, value] = words[..] else {
            return Err(err(format!(
                "expected `w <n> <addr> <value>`, found `{content}`"
            )));
        };
        if w != "w" {
            return Err(err(format!("unknown command `{w}`")));
        }
        let n: u128 = n
            .parse()
            .map_err(|_| err(format!("bad byte count `{n}`")))?;
        let hex = addr
            .strip_prefix("0x")
            .or_else(|| addr.strip_prefix("0X"))
            .unwrap_or(addr);
        let addr =
            u128::from_str_radix(hex, 16).map_err(|_| err(format!("bad address `{addr}`")))?;
        let value = parse_natural(value).ok_or_else(|| err(format!("bad value `{value}`")))?;
        if n < 128 && value >> (8 * n) != 0 {
            return Err(err(format!("value {value:#x} does not fit in {n} bytes")));
        }
        mem.wr_n(n, addr, value).map_err(|e| err(e.to_string()))?;
    }
    Ok(mem)
}
