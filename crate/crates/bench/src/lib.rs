//! Workloads shared by the benchmarks.

use std::time::{Duration, Instant};

use ll2fun::oracle::{ENTRY, WHILE_DEF};
use ll2fun::state::parse_memory_image;
use ll2fun::{compile_source, Evaluator, MachineState, Program};

pub const OCCURRENCES: &str = include_str!("../../core/fixtures/occurrences.ll");
pub const SAMPLE_IMAGE: &str = include_str!("../../core/fixtures/sample.mem");
pub const ARRAY: u128 = 0x8000;
/// LLVM instructions in the occurrences loop body, terminator included.
pub const INSTRS_PER_ITERATION: u64 = 9;
/// Lower bound on evaluator throughput, in LLVM instructions per second.
pub const FLOOR: f64 = 2.37e6;

pub fn occurrences_program() -> Program {
    compile_source(OCCURRENCES).expect("fixture translates")
}

pub fn sample_state() -> MachineState {
    MachineState::default()
        .with_memory(parse_memory_image(SAMPLE_IMAGE).expect("fixture image parses"))
}

/// Count zero words in an `n`-word array with checks off; returns the
/// result and the loop iterations executed.
pub fn count_zeros(program: &Program, n: u128, st: MachineState) -> (u128, u64) {
    let (st, stats) = Evaluator::new(program)
        .check_signatures(false)
        .run(ENTRY, &[0, n, ARRAY], st)
        .expect("workload runs");
    (st.retval, stats.iterations.get(WHILE_DEF))
}

#[derive(Debug, Clone, Copy)]
pub struct Throughput {
    pub iterations: u64,
    pub elapsed: Duration,
}

impl Throughput {
    pub fn instructions_per_second(&self) -> f64 {
        let secs = self.elapsed.max(Duration::from_nanos(1)).as_secs_f64();
        (self.iterations * INSTRS_PER_ITERATION) as f64 / secs
    }
}

/// Time one `n`-iteration run.
pub fn measure(program: &Program, n: u128) -> Throughput {
    let st = sample_state();
    let start = Instant::now();
    let (_, iterations) = count_zeros(program, n, st);
    Throughput {
        iterations,
        elapsed: start.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workload_matches_the_reference_counts() {
        let p = occurrences_program();
        assert_eq!(count_zeros(&p, 8, sample_state()), (1, 8));
        assert_eq!(count_zeros(&p, 1000, sample_state()), (993, 1000));
    }

    #[test]
    fn zero_time_does_not_divide_by_zero() {
        let t = Throughput {
            iterations: 1,
            elapsed: Duration::ZERO,
        };
        assert!(t.instructions_per_second().is_finite());
    }
}
