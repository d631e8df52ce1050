//! Memory model properties with their input strategies.

use ll2fun::state::{ByteMemory, StateFault};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestError, TestRunner};

pub const CASES: u32 = 10_000;

#[derive(Debug, Clone)]
pub enum MemOp {
    Write { n: u128, addr: u128, value: u128 },
    Read { n: u128, addr: u128 },
}

/// Addresses clustered in a small window so that accesses overlap, placed
/// anywhere including the top of the address space.
fn window() -> impl Strategy<Value = u128> {
    prop_oneof![
        Just(0u128),
        Just((1u128 << 32) - 64),
        (0u128..(1u128 << 32) - 64),
    ]
}

fn mem_op(base: u128) -> impl Strategy<Value = MemOp> {
    let n = 1u128..=8;
    let off = 0u128..64;
    prop_oneof![
        (
            n.clone(),
            off.clone(),
            prop_oneof![Just(0u128), any::<u64>().prop_map(u128::from)]
        )
            .prop_map(move |(n, o, value)| MemOp::Write {
                n,
                addr: base + o,
                value
            }),
        (n, off).prop_map(move |(n, o)| MemOp::Read { n, addr: base + o }),
    ]
}

pub fn trace() -> impl Strategy<Value = (u128, Vec<MemOp>)> {
    window().prop_flat_map(|base| (Just(base), prop::collection::vec(mem_op(base), 0..40)))
}

/// Up to 64 random bytes in `[0x1000, 0x1100)`.
pub fn memory() -> impl Strategy<Value = ByteMemory> {
    prop::collection::vec((0u32..256, any::<u8>()), 0..64).prop_map(|bytes| {
        let mut m = ByteMemory::new();
        for (a, b) in bytes {
            m.set_byte(0x1000 + a, b);
        }
        m
    })
}

/// Addresses overlapping the populated region and its edges.
pub fn address() -> std::ops::Range<u128> {
    0x0ff0..0x1110
}

pub fn mask(n: u128) -> u128 {
    (1u128 << (8 * n)) - 1
}

fn in_range(n: u128, addr: u128) -> bool {
    addr + n <= 1u128 << 32
}

/// A flat byte array covering `[base, base + 72)`.
struct Reference {
    base: u128,
    bytes: Vec<u8>,
}

impl Reference {
    fn new(base: u128) -> Self {
        Reference {
            base,
            bytes: vec![0; 72],
        }
    }

    fn write(&mut self, n: u128, addr: u128, value: u128) -> Result<(), ()> {
        if !in_range(n, addr) {
            return Err(());
        }
        for k in 0..n {
            self.bytes[(addr + k - self.base) as usize] = (value >> (8 * k)) as u8;
        }
        Ok(())
    }

    fn read(&self, n: u128, addr: u128) -> Result<u128, ()> {
        if !in_range(n, addr) {
            return Err(());
        }
        let start = (addr - self.base) as usize;
        let mut word = [0u8; 16];
        word[..n as usize].copy_from_slice(&self.bytes[start..start + n as usize]);
        Ok(u128::from_le_bytes(word))
    }
}

pub fn read_over_write(
    mut m: ByteMemory,
    n: u128,
    addr: u128,
    value: u128,
) -> Result<(), TestCaseError> {
    m.wr_n(n, addr, value).unwrap();
    prop_assert_eq!(m.rd_n(n, addr).unwrap(), value & mask(n));
    Ok(())
}

pub fn disjoint_frame(
    m: ByteMemory,
    (n, addr, value): (u128, u128, u64),
    (k, other): (u128, u128),
) -> Result<(), TestCaseError> {
    if !(other + k <= addr || addr + n <= other) {
        // Make the ranges disjoint by moving the observed one past the write.
        return disjoint_frame(m, (n, addr, value), (k, addr + n));
    }
    let before = m.rd_n(k, other).unwrap();
    let mut after = m.clone();
    after.wr_n(n, addr, value.into()).unwrap();
    prop_assert_eq!(after.rd_n(k, other).unwrap(), before);
    let mut changed = after.diff(&m);
    changed.retain(|a| !(addr..addr + n).contains(&(*a as u128)));
    prop_assert!(
        changed.is_empty(),
        "bytes outside the write changed: {:?}",
        changed
    );
    Ok(())
}

pub fn little_endian_decomposition(
    m: ByteMemory,
    n: u128,
    addr: u128,
) -> Result<(), TestCaseError> {
    let word = m.rd_n(n, addr).unwrap();
    let bytes = m.read_bytes(n, addr).unwrap();
    let recomposed = bytes
        .iter()
        .enumerate()
        .fold(0u128, |acc, (i, b)| acc | (*b as u128) << (8 * i));
    prop_assert_eq!(word, recomposed);
    for (i, b) in bytes.iter().enumerate() {
        prop_assert_eq!(*b, m.byte((addr + i as u128) as u32));
    }
    let mut fresh = ByteMemory::new();
    fresh.wr_n(n, addr, word).unwrap();
    prop_assert_eq!(fresh.read_bytes(n, addr).unwrap(), bytes);
    Ok(())
}

pub fn canonical_sparseness(ops: &[MemOp]) -> Result<(), TestCaseError> {
    let mut m = ByteMemory::new();
    for op in ops {
        if let MemOp::Write { n, addr, value } = op {
            let _ = m.wr_n(*n, *addr, *value);
            prop_assert!(m.is_canonical());
        }
    }
    // Rebuilding from the observable bytes gives a structurally equal memory.
    let mut replay = ByteMemory::new();
    for (a, b) in m.iter() {
        prop_assert!(b != 0);
        replay.set_byte(a, b);
    }
    prop_assert_eq!(&replay, &m);
    let addrs: Vec<u32> = m.iter().map(|(a, _)| a).collect();
    prop_assert!(addrs.windows(2).all(|w| w[0] < w[1]));
    // Zeroing everything written leaves nothing stored.
    for op in ops {
        if let MemOp::Write { n, addr, .. } = op {
            let _ = m.wr_n(*n, *addr, 0);
        }
    }
    prop_assert!(m.is_empty());
    prop_assert_eq!(m, ByteMemory::new());
    Ok(())
}

pub fn byte_array_trace_equivalence(base: u128, ops: &[MemOp]) -> Result<(), TestCaseError> {
    let mut m = ByteMemory::new();
    let mut reference = Reference::new(base);
    for op in ops {
        match *op {
            MemOp::Write { n, addr, value } => {
                let got = m.wr_n(n, addr, value);
                let want = reference.write(n, addr, value);
                prop_assert_eq!(got.is_ok(), want.is_ok(), "write {} at {:#x}", n, addr);
                if let Err(e) = got {
                    let overflow = matches!(e, StateFault::AddressOverflow { .. });
                    prop_assert!(overflow, "unexpected fault {:?}", e);
                }
            }
            MemOp::Read { n, addr } => {
                prop_assert_eq!(
                    m.rd_n(n, addr).ok(),
                    reference.read(n, addr).ok(),
                    "read {} at {:#x}",
                    n,
                    addr
                );
            }
        }
    }
    for (i, b) in reference.bytes.iter().enumerate() {
        let a = base + i as u128;
        if a < 1u128 << 32 {
            prop_assert_eq!(m.byte(a as u32), *b);
        }
    }
    prop_assert!(m
        .iter()
        .all(|(a, _)| (a as u128) >= base && (a as u128) < base + 72));
    Ok(())
}

/// Every property by name, run for `cases` cases each.
pub fn run_all(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    fn run<S: Strategy>(
        cases: u32,
        strategy: S,
        test: impl Fn(S::Value) -> Result<(), TestCaseError>,
    ) -> Result<(), String> {
        let mut runner = TestRunner::new(Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        });
        runner.run(&strategy, test).map_err(|e| match e {
            TestError::Fail(why, input) => format!("{why}; minimal input {input:?}"),
            TestError::Abort(why) => why.to_string(),
        })
    }
    vec![
        (
            "read-over-write",
            run(
                cases,
                (memory(), 1u128..=8, address(), any::<u128>()),
                |(m, n, a, v)| read_over_write(m, n, a, v),
            ),
        ),
        (
            "disjoint frame",
            run(
                cases,
                (
                    memory(),
                    (1u128..=8, address(), any::<u64>()),
                    (1u128..=8, address()),
                ),
                |(m, w, r)| disjoint_frame(m, w, r),
            ),
        ),
        (
            "little-endian decomposition",
            run(cases, (memory(), 1u128..=16, address()), |(m, n, a)| {
                little_endian_decomposition(m, n, a)
            }),
        ),
        (
            "canonical sparseness",
            run(cases, trace(), |(_, ops)| canonical_sparseness(&ops)),
        ),
        (
            "byte-array trace equivalence",
            run(cases, trace(), |(base, ops)| {
                byte_array_trace_equivalence(base, &ops)
            }),
        ),
    ]
}
