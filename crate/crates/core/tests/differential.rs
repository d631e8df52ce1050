//! Translated programs agree with a direct interpreter of the LLVM AST on
//! random straight-line and single-loop functions.

mod support;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::differential::check;
use support::gen::Gen;

const PROGRAMS: u64 = 1000;

fn campaign(base: u64, loop_: bool) {
    let mut failures = Vec::new();
    for i in 0..PROGRAMS {
        if let Err(e) = check(base + i, loop_) {
            failures.push(e);
        }
    }
    assert!(
        failures.is_empty(),
        "{} of {PROGRAMS} programs disagree; first:\n{}",
        failures.len(),
        failures[0]
    );
}

#[test]
fn straight_line_programs_agree() {
    campaign(0x5eed_0000, false);
}

#[test]
fn single_loop_programs_agree() {
    campaign(0x5eed_8000, true);
}

#[test]
fn generated_programs_are_deterministic() {
    let text = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Gen::new(&mut rng).single_loop()
    };
    assert_eq!(text(7), text(7));
    assert_ne!(text(7), text(8));
}
