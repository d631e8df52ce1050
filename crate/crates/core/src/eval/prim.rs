//! Semantics of the pure primitives on naturals.

use crate::fun::PrimOp;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrimFault {
    #[error("`{0}` overflows 128 bits")]
    Overflow(&'static str),
    #[error("`{op}` width {width} is outside 1..=127")]
    BadWidth { op: &'static str, width: u128 },
    #[error("`bits` high index {h} is below low index {l}")]
    BadRange { h: u128, l: u128 },
}

fn mask(w: u32) -> u128 {
    if w >= 128 {
        u128::MAX
    } else {
        (1u128 << w) - 1
    }
}

/// `floor(x / 2^l) mod 2^(h-l+1)`.
pub fn bits(x: u128, h: u128, l: u128) -> Result<u128, PrimFault> {
    if h < l {
        return Err(PrimFault::BadRange { h, l });
    }
    if l >= 128 {
        return Ok(0);
    }
    let len = (h - l + 1).min(128) as u32;
    Ok((x >> l) & mask(len))
}

fn width(op: PrimOp, w: u128) -> Result<u32, PrimFault> {
    if (1..=127).contains(&w) {
        Ok(w as u32)
    } else {
        Err(PrimFault::BadWidth {
            op: op.name(),
            width: w,
        })
    }
}

/// Two's-complement reading of the low `w` bits of `x`.
pub fn signed(w: u32, x: u128) -> i128 {
    let x = x & mask(w);
    if w < 128 && x >> (w - 1) & 1 == 1 {
        (x as i128).wrapping_sub(1i128 << w)
    } else {
        x as i128
    }
}

fn flag(b: bool) -> u128 {
    b as u128
}

/// Apply a primitive that neither reads nor writes the state. `args` has
/// the operator's arity.
pub fn apply_pure(op: PrimOp, a: &[u128]) -> Result<u128, PrimFault> {
    Ok(match op {
        PrimOp::Bits => bits(a[0], a[1], a[2])?,
        PrimOp::Add => a[0].checked_add(a[1]).ok_or(PrimFault::Overflow("+"))?,
        PrimOp::Mul => a[0].checked_mul(a[1]).ok_or(PrimFault::Overflow("*"))?,
        PrimOp::BvSub => {
            let w = width(op, a[0])?;
            (a[1] & mask(w)).wrapping_sub(a[2] & mask(w)) & mask(w)
        }
        PrimOp::LogAnd => a[0] & a[1],
        PrimOp::LogIor => a[0] | a[1],
        PrimOp::LogXor => a[0] ^ a[1],
        PrimOp::BvShl | PrimOp::BvLshr | PrimOp::BvAshr => {
            let w = width(op, a[0])?;
            let (x, s) = (a[1] & mask(w), a[2]);
            if s >= w as u128 {
                0
            } else {
                let s = s as u32;
                match op {
                    PrimOp::BvShl => (x << s) & mask(w),
                    PrimOp::BvLshr => x >> s,
                    _ => ((signed(w, x) >> s) as u128) & mask(w),
                }
            }
        }
        PrimOp::Eq => flag(a[0] == a[1]),
        PrimOp::Ne => flag(a[0] != a[1]),
        PrimOp::Lt => flag(a[0] < a[1]),
        PrimOp::Le => flag(a[0] <= a[1]),
        PrimOp::Gt => flag(a[0] > a[1]),
        PrimOp::Ge => flag(a[0] >= a[1]),
        PrimOp::Slt | PrimOp::Sle | PrimOp::Sgt | PrimOp::Sge => {
            let w = width(op, a[0])?;
            let (x, y) = (signed(w, a[1]), signed(w, a[2]));
            flag(match op {
                PrimOp::Slt => x < y,
                PrimOp::Sle => x <= y,
                PrimOp::Sgt => x > y,
                _ => x >= y,
            })
        }
        PrimOp::Sext => {
            let from = width(op, a[0])?;
            let to = width(op, a[1])?;
            let x = a[2] & mask(from);
            if to > from && x >> (from - 1) & 1 == 1 {
                x | (mask(to) & !mask(from))
            } else {
                x & mask(to)
            }
        }
        _ => unreachable!("`{}` touches the state", op.name()),
    })
}

/// Little-endian assembly of a byte run.
pub fn word_from_bytes(bytes: &[u8]) -> u128 {
    bytes
        .iter()
        .rev()
        .fold(0u128, |acc, b| (acc << 8) | *b as u128)
}
