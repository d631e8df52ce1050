#![allow(dead_code)]

pub mod differential;
pub mod gen;
pub mod interp;
pub mod memprops;

use ll2fun::state::parse_memory_image;
use ll2fun::MachineState;

pub const OCCURRENCES: &str = include_str!("../../fixtures/occurrences.ll");
pub const SUM2D: &str = include_str!("../../fixtures/sum2d.ll");
pub const ARITH: &str = include_str!("../../fixtures/arith.ll");
pub const CALLS: &str = include_str!("../../fixtures/calls.ll");
pub const DIVERGE: &str = include_str!("../../fixtures/diverge.ll");
pub const EMPTY: &str = include_str!("../../fixtures/empty.ll");
pub const SAMPLE_IMAGE: &str = include_str!("../../fixtures/sample.mem");

/// Every fixture that translates, by name.
pub const FIXTURES: [(&str, &str); 6] = [
    ("occurrences", OCCURRENCES),
    ("sum2d", SUM2D),
    ("arith", ARITH),
    ("calls", CALLS),
    ("diverge", DIVERGE),
    ("empty", EMPTY),
];

pub fn sample_state() -> MachineState {
    MachineState::default().with_memory(parse_memory_image(SAMPLE_IMAGE).unwrap())
}
