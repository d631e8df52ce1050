//! One PASS/FAIL line per acceptance criterion.
//!
//! The throughput floor is reported but not enforced when `CI` is set.

mod support;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ll2fun::fun::{check_cliques, check_closed_terms, check_state_threading, FunProgram};
use ll2fun::ll::parse_source;
use ll2fun::oracle::{run_campaign, ENTRY, WHILE_DEF};
use ll2fun::{translate_source, Evaluator, Program};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ARRAY: u128 = 0x8000;
const MILLION: u128 = 1_000_000;
const FLOOR: f64 = 2.37e6;
const CAMPAIGN_SEED: u64 = 0x0cc0_0e5e;
const DIFFERENTIAL_SEED: u64 = 0xd1ff_0000;

type Check<'a> = Box<dyn Fn() -> Verdict + 'a>;

struct Verdict {
    pass: bool,
    detail: String,
    enforced: bool,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
            enforced: true,
        }
    }
}

fn secs(d: Duration) -> String {
    format!("{:.3}s", d.as_secs_f64())
}

fn million_run(program: &Program) -> Result<(u128, ll2fun::eval::Stats, Duration), String> {
    let start = Instant::now();
    let (st, stats) = Evaluator::new(program)
        .check_signatures(false)
        .run(ENTRY, &[0, MILLION, ARRAY], support::sample_state())
        .map_err(|e| e.to_string())?;
    Ok((st.retval, stats, start.elapsed()))
}

fn criterion1() -> Verdict {
    let start = Instant::now();
    let result = ll2fun::compile_source(support::OCCURRENCES)
        .map_err(|e| e.to_string())
        .and_then(|p| {
            Evaluator::new(&p)
                .run(ENTRY, &[399, 8, ARRAY], support::sample_state())
                .map_err(|e| e.to_string())
        });
    let elapsed = start.elapsed();
    match result {
        Ok((st, _)) => Verdict::new(
            st.retval == 3 && elapsed < Duration::from_secs(1),
            format!(
                "occurrences(399, 8, 0x8000) = {} in {}",
                st.retval,
                secs(elapsed)
            ),
        ),
        Err(e) => Verdict::new(false, e),
    }
}

fn criterion2(program: &Program) -> Verdict {
    match million_run(program) {
        Ok((r, _, elapsed)) => Verdict::new(
            r == 999_993 && elapsed < Duration::from_secs(10),
            format!(
                "occurrences(0, 1000000, 0x8000) = {r} in {} unchecked",
                secs(elapsed)
            ),
        ),
        Err(e) => Verdict::new(false, e),
    }
}

fn criterion3(program: &Program) -> Verdict {
    let m = parse_source(support::OCCURRENCES).unwrap();
    let body = m.functions[0].block(".lr.ph").unwrap();
    let per_iteration = body.body.len() as f64 + 1.0;
    let mut best: Option<(f64, u64)> = None;
    for _ in 0..3 {
        match million_run(program) {
            Ok((_, stats, elapsed)) => {
                let iterations = stats.iterations.get(WHILE_DEF);
                let rate = iterations as f64 * per_iteration / elapsed.as_secs_f64();
                if best.is_none_or(|(r, _)| rate > r) {
                    best = Some((rate, iterations));
                }
            }
            Err(e) => return Verdict::new(false, e),
        }
    }
    let (rate, iterations) = best.expect("three runs");
    let ci = std::env::var_os("CI").is_some();
    Verdict {
        pass: rate >= FLOOR && per_iteration == 9.0,
        detail: format!(
            "{:.2}M instr/s ({iterations} iterations x {per_iteration} instr, best of 3), floor {:.2}M{}",
            rate / 1e6,
            FLOOR / 1e6,
            if ci { ", reported only under CI" } else { "" }
        ),
        enforced: !ci,
    }
}

fn criterion4(program: &Program) -> Verdict {
    let start = Instant::now();
    let report = run_campaign(program, 10_000, 64, CAMPAIGN_SEED);
    let mut failures = Vec::new();
    for i in 0..1000u64 {
        if let Err(e) = support::differential::check(DIFFERENTIAL_SEED + i, i % 2 == 1) {
            failures.push(e);
        }
    }
    let mut detail = format!(
        "equivalence: {}; differential: 1000 programs (500 straight-line, 500 single-loop), {} failures, seeds from {DIFFERENTIAL_SEED:#x}; {}",
        report.to_string().lines().last().unwrap_or_default(),
        failures.len(),
        secs(start.elapsed())
    );
    if !report.passed() {
        detail.push_str(&format!("\n{report}"));
    }
    if let Some(first) = failures.first() {
        detail.push_str(&format!("\nfirst differential failure: {first}"));
    }
    Verdict::new(report.passed() && failures.is_empty(), detail)
}

fn criterion5() -> Verdict {
    let start = Instant::now();
    let results = support::memprops::run_all(support::memprops::CASES);
    let elapsed = start.elapsed();
    let failed: Vec<String> = results
        .iter()
        .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    let names: Vec<&str> = results.iter().map(|(n, _)| *n).collect();
    let mut detail = format!(
        "{} properties x {} cases ({}) in {}",
        results.len(),
        support::memprops::CASES,
        names.join(", "),
        secs(elapsed)
    );
    for f in &failed {
        detail.push_str(&format!("\n{f}"));
    }
    Verdict::new(
        failed.is_empty() && elapsed < Duration::from_secs(30),
        detail,
    )
}

fn structural(name: &str, program: &FunProgram, loops: usize) -> Result<(), String> {
    check_closed_terms(program).map_err(|e| format!("{name}: {e}"))?;
    check_state_threading(program).map_err(|e| format!("{name}: {e}"))?;
    let cliques = check_cliques(program).map_err(|e| format!("{name}: {e}"))?;
    if cliques.len() != loops {
        return Err(format!(
            "{name}: {} cliques for {loops} loops",
            cliques.len()
        ));
    }
    Ok(())
}

fn criterion6() -> Verdict {
    let mut checked = 0;
    let mut loops_total = 0;
    let mut errors = Vec::new();
    for (name, src) in support::FIXTURES {
        match translate_source(src) {
            Ok(t) => {
                loops_total += t.summary.loops;
                checked += 1;
                if let Err(e) = structural(name, &t.program, t.summary.loops) {
                    errors.push(e);
                }
            }
            Err(e) => errors.push(format!("{name}: {e}")),
        }
    }
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = support::gen::Gen::new(&mut rng);
        let (src, loops) = if seed % 2 == 0 {
            (g.single_loop(), 1)
        } else {
            (g.straight_line(), 0)
        };
        match translate_source(&src) {
            Ok(t) => {
                checked += 1;
                loops_total += loops;
                if let Err(e) = structural(&format!("generated seed {seed}"), &t.program, loops) {
                    errors.push(e);
                }
            }
            Err(e) => errors.push(format!("generated seed {seed}: {e}")),
        }
    }
    let mut detail = format!(
        "{checked} programs ({} fixtures, 200 generated), {loops_total} loops, one clique each; closed-term and state-threading checks",
        support::FIXTURES.len()
    );
    for e in &errors {
        detail.push_str(&format!("\n{e}"));
    }
    Verdict::new(errors.is_empty(), detail)
}

fn criterion7(program: &Program) -> Verdict {
    let small = Evaluator::new(program)
        .check_signatures(false)
        .run(ENTRY, &[0, 8, ARRAY], support::sample_state())
        .map(|(_, s)| s.max_depth);
    // A host stack this small would overflow long before 10^6 nested calls.
    let program = program.clone();
    let big = std::thread::Builder::new()
        .stack_size(256 * 1024)
        .spawn(move || million_run(&program).map(|(r, s, _)| (r, s.max_depth)))
        .expect("spawn")
        .join();
    match (small, big) {
        (Ok(d8), Ok(Ok((r, d)))) => Verdict::new(
            r == 999_993 && d == d8 && d <= 4,
            format!("max call depth {d} for 10^6 iterations on a 256 KiB thread ({d8} for 8 iterations)"),
        ),
        (Err(e), _) => Verdict::new(false, e.to_string()),
        (_, Ok(Err(e))) => Verdict::new(false, e),
        (_, Err(_)) => Verdict::new(false, "the 10^6 run crashed its thread"),
    }
}

fn main() -> ExitCode {
    let program = ll2fun::compile_source(support::OCCURRENCES).expect("fixture compiles");
    let criteria: Vec<(&str, Check)> = vec![
        ("occurrences on the sample image", Box::new(criterion1)),
        ("million-iteration run", Box::new(|| criterion2(&program))),
        ("throughput floor", Box::new(|| criterion3(&program))),
        (
            "differential correctness",
            Box::new(|| criterion4(&program)),
        ),
        ("memory-model properties", Box::new(criterion5)),
        ("structural validation", Box::new(criterion6)),
        ("stack safety", Box::new(|| criterion7(&program))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("{status} criterion {}: {name}: {}", i + 1, v.detail);
        if !v.pass && v.enforced {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
