//! Reference definitions for the `occurrences` function (count how many of
//! the first `n` 64-bit words at `array` equal `val`) and a randomized
//! campaign comparing them with the translated program.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::{bits, EvalError, EvalOptions, Evaluator, Program, Value};
use crate::state::{MachineState, StateFault};

/// Entry point of the translated function.
pub const ENTRY: &str = "occurrences";
/// The translated loop.
pub const WHILE_DEF: &str = "occurrences_step_0_while";
/// Position of `num_occur` in the loop's result frame.
pub const NUM_OCCUR_INDEX: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("lift did not finish within {0} elements")]
    Budget(u64),
    #[error("{0}")]
    State(#[from] StateFault),
}

/// The words the loop visits: starting from index `j`, read the 8-byte word
/// at `array + 8j`, then advance `j` modulo `2^64` and stop once its low 32
/// bits equal `n`. Nothing is read when `done` is 1.
pub fn liftlist(
    done: u128,
    j: u128,
    array: u128,
    n: u128,
    st: &MachineState,
    budget: u64,
) -> Result<Vec<u128>, OracleError> {
    let mut out = Vec::new();
    let (mut done, mut j) = (done, j);
    while done != 1 {
        if out.len() as u64 >= budget {
            return Err(OracleError::Budget(budget));
        }
        let ptr = array + 8 * j;
        out.push(st.mem.rd_n(8, ptr)?);
        j = bits(j + 1, 63, 0).expect("valid range");
        done = (bits(j, 31, 0).expect("valid range") == n) as u128;
    }
    Ok(out)
}

/// Number of elements equal to `val`.
pub fn occurlist(val: u128, xs: &[u128]) -> u128 {
    xs.iter().filter(|x| **x == val).count() as u128
}

/// The specified result: 0 when `n` is 0, else the count modulo `2^64`.
pub fn occurrences_spec(
    val: u128,
    n: u128,
    array: u128,
    st: &MachineState,
    budget: u64,
) -> Result<u128, OracleError> {
    if n == 0 {
        return Ok(0);
    }
    let xs = liftlist(0, 0, array, n, st, budget)?;
    Ok(bits(occurlist(val, &xs), 63, 0).expect("valid range"))
}

/// Run the translated function and return its `retval`.
pub fn occurrences_impl(
    program: &Program,
    val: u128,
    n: u128,
    array: u128,
    st: &MachineState,
    options: EvalOptions,
) -> Result<u128, EvalError> {
    let (st, _) =
        Evaluator::new(program)
            .options(options)
            .run(ENTRY, &[val, n, array], st.clone())?;
    Ok(st.retval)
}

/// Run the translated loop directly from a frame and return the frame it
/// finishes with.
#[allow(clippy::too_many_arguments)]
pub fn run_while(
    program: &Program,
    done: u128,
    num_occur: u128,
    j: u128,
    array: u128,
    n: u128,
    val: u128,
    st: &MachineState,
    options: EvalOptions,
) -> Result<Vec<Value>, EvalError> {
    let mut args: Vec<Value> = [done, num_occur, j, array, n, val]
        .into_iter()
        .map(Value::Nat)
        .collect();
    args.push(Value::state(st.clone()));
    let out = Evaluator::new(program)
        .options(options)
        .eval_def(WHILE_DEF, args)?;
    match out.value {
        Value::Multi(vs) => Ok(vs),
        v => Ok(vec![v]),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trial {
    pub val: u128,
    pub n: u128,
    pub array: u128,
    pub implementation: Result<u128, String>,
    pub spec: Result<u128, String>,
}

impl Trial {
    pub fn passed(&self) -> bool {
        match (&self.implementation, &self.spec) {
            (Ok(a), Ok(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for Trial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |r: &Result<u128, String>| match r {
            Ok(v) => v.to_string(),
            Err(e) => format!("error: {e}"),
        };
        write!(
            f,
            "{} val={} n={} array={:#x} impl={} spec={}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.val,
            self.n,
            self.array,
            show(&self.implementation),
            show(&self.spec)
        )
    }
}

/// Compare the translated program with the specification on one input.
pub fn check_occurrences_equiv(
    program: &Program,
    val: u128,
    n: u128,
    array: u128,
    st: &MachineState,
    budget: u64,
) -> Trial {
    let options = EvalOptions {
        check_signatures: true,
        budget: Some(budget),
    };
    Trial {
        val,
        n,
        array,
        implementation: occurrences_impl(program, val, n, array, st, options)
            .map_err(|e| e.to_string()),
        spec: occurrences_spec(val, n, array, st, budget).map_err(|e| e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CampaignReport {
    pub seed: u64,
    pub trials: u64,
    pub failures: Vec<Trial>,
}

impl CampaignReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for CampaignReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.failures {
            writeln!(f, "{t}")?;
        }
        write!(
            f,
            "{} trials, {} failures, seed {}",
            self.trials,
            self.failures.len(),
            self.seed
        )
    }
}

/// A random input: up to `max_n` words at a random address, drawn so that
/// `val` occurs with some frequency.
pub fn random_input(rng: &mut impl Rng, max_n: u128) -> (u128, u128, u128, MachineState) {
    let n = rng.gen_range(0..=max_n);
    let val = rng.gen::<u64>() as u128;
    let array = rng.gen_range(0..=(1u128 << 32) - 8 * (max_n + 1));
    let mut st = MachineState::default();
    for k in 0..n {
        let w = match rng.gen_range(0..4) {
            0 => val,
            1 => 0,
            _ => rng.gen::<u64>() as u128,
        };
        st.mem
            .wr_n(8, array + 8 * k, w)
            .expect("array fits below 2^32");
    }
    // Noise around the array, including the word just past its end.
    for _ in 0..4 {
        let off = rng.gen_range(0..8 * (max_n + 1));
        st.mem
            .wr_n(1, array + off, rng.gen::<u8>() as u128)
            .expect("in range");
    }
    (val, n, array, st)
}

/// Run `trials` random comparisons with arrays of at most `max_n` words.
pub fn run_campaign(program: &Program, trials: u64, max_n: u128, seed: u64) -> CampaignReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for _ in 0..trials {
        let (val, n, array, st) = random_input(&mut rng, max_n);
        let t = check_occurrences_equiv(program, val, n, array, &st, 1 << 20);
        if !t.passed() {
            failures.push(t);
        }
    }
    CampaignReport {
        seed,
        trials,
        failures,
    }
}
