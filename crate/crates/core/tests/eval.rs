//! Evaluator behaviour on the fixtures.

mod support;

use ll2fun::eval::{EvalErrorKind, Value};
use ll2fun::oracle::{ENTRY, WHILE_DEF};
use ll2fun::state::StateFault;
use ll2fun::{compile_source, Evaluator, MachineState};

const ARRAY: u128 = 0x8000;

fn occurrences(val: u128, n: u128, st: MachineState) -> (MachineState, ll2fun::eval::Stats) {
    let p = compile_source(support::OCCURRENCES).unwrap();
    let out = Evaluator::new(&p).run(ENTRY, &[val, n, ARRAY], st).unwrap();
    out
}

#[test]
fn occurrences_on_the_sample_image() {
    let (st, stats) = occurrences(399, 8, support::sample_state());
    assert_eq!(st.retval, 3);
    assert_eq!(stats.iterations.get(WHILE_DEF), 8);
    assert_eq!(st.mem, support::sample_state().mem);
    assert_eq!((st.stack, st.frame), (0xffff_0000, 0xffff_0000));
    assert_eq!(st.frame_depth(), 0);
}

#[test]
fn other_values_in_the_image() {
    for (val, expected) in [
        (20, 1),
        (u64::MAX as u128, 1),
        (0, 1),
        (75, 1),
        (234, 1),
        (1, 0),
    ] {
        assert_eq!(
            occurrences(val, 8, support::sample_state()).0.retval,
            expected,
            "val {val}"
        );
    }
}

#[test]
fn zero_length_array_skips_the_loop() {
    let (st, stats) = occurrences(0, 0, support::sample_state());
    assert_eq!(st.retval, 0);
    assert_eq!(stats.iterations.get(WHILE_DEF), 0);
}

#[test]
fn budget_is_enforced_on_the_divergent_loop() {
    let p = compile_source(support::DIVERGE).unwrap();
    let err = Evaluator::new(&p)
        .budget(Some(1000))
        .run("spin", &[5], MachineState::default())
        .unwrap_err();
    assert!(err.is_budget(), "{err}");
    let EvalErrorKind::Budget { budget, counts } = &err.kind else {
        unreachable!()
    };
    assert_eq!(*budget, 1000);
    assert_eq!(counts.total(), 1000);
    assert_eq!(err.steps, 1000);
    assert_eq!(err.def, "spin_step_0_while");
}

#[test]
fn budget_equal_to_iterations_suffices() {
    let p = compile_source(support::OCCURRENCES).unwrap();
    let run = |b| {
        Evaluator::new(&p)
            .budget(Some(b))
            .run(ENTRY, &[399, 8, ARRAY], support::sample_state())
    };
    assert_eq!(run(8).unwrap().0.retval, 3);
    assert!(run(7).unwrap_err().is_budget());
}

#[test]
fn nested_loops() {
    let p = compile_source(support::SUM2D).unwrap();
    let mut st = MachineState::default();
    for k in 0..12u128 {
        st.store_bytes(8, 0x1000 + 8 * k, k * k).unwrap();
    }
    let (out, stats) = Evaluator::new(&p)
        .run("sum2d", &[0x1000, 3, 4], st)
        .unwrap();
    assert_eq!(out.retval, (0..12).map(|k| k * k).sum::<u128>());
    assert_eq!(stats.iterations.total(), 3 + 12);
    let (out, _) = Evaluator::new(&p)
        .run("sum2d", &[0x1000, 3, 0], MachineState::default())
        .unwrap();
    assert_eq!(out.retval, 0);
}

#[test]
fn arithmetic() {
    let p = compile_source(support::ARITH).unwrap();
    let mix = |a: u32, b: u32, c: u8| -> u32 {
        let sum = a.wrapping_add(b);
        let diff = a.wrapping_sub(b);
        let prod = sum.wrapping_mul(-3i32 as u32);
        let sh = prod << 2;
        let lo = diff >> 5;
        let hi = ((diff as i32) >> 28) as u32;
        let m = ((sh ^ lo) | hi) & 65535;
        let wide = c as i8 as i32 as u32;
        let sel = if (wide as i32) < 0 { m } else { wide };
        sel as u16 as u32
    };
    for (a, b, c) in [
        (1, 2, 3),
        (0xdead_beef, 0x1234_5678, 0x80),
        (0, 0, 0xff),
        (u32::MAX, 1, 0x7f),
    ] {
        let (st, _) = Evaluator::new(&p)
            .run(
                "mix",
                &[a as u128, b as u128, c as u128],
                MachineState::default(),
            )
            .unwrap();
        assert_eq!(
            st.retval,
            mix(a, b, c) as u128,
            "mix({a:#x}, {b:#x}, {c:#x})"
        );
    }
}

#[test]
fn calls_and_alloca() {
    let p = compile_source(support::CALLS).unwrap();
    let (st, stats) = Evaluator::new(&p)
        .run("sum_squares", &[3, 4], MachineState::default())
        .unwrap();
    assert_eq!(st.retval, 25);
    assert_eq!(st.mem.rd_n(8, 0xffff_0000).unwrap(), 25);
    assert_eq!(st.stack, 0xffff_0000);
    assert!(stats.max_depth >= 2);
}

#[test]
fn signature_violations_are_reported() {
    let p = compile_source(support::OCCURRENCES).unwrap();
    let err = Evaluator::new(&p)
        .run(ENTRY, &[1 << 64, 8, ARRAY], support::sample_state())
        .unwrap_err();
    assert!(matches!(err.kind, EvalErrorKind::Signature(_)), "{err}");
    // Unchecked, the oversized value simply never matches.
    let (st, _) = Evaluator::new(&p)
        .check_signatures(false)
        .run(ENTRY, &[1 << 64, 8, ARRAY], support::sample_state())
        .unwrap();
    assert_eq!(st.retval, 0);
}

#[test]
fn arity_and_unknown_defs() {
    let p = compile_source(support::OCCURRENCES).unwrap();
    let err = Evaluator::new(&p)
        .run(ENTRY, &[1, 2], MachineState::default())
        .unwrap_err();
    assert!(
        matches!(
            err.kind,
            EvalErrorKind::Arity {
                expected: 4,
                found: 3
            }
        ),
        "{err}"
    );
    let err = Evaluator::new(&p)
        .run("nope", &[], MachineState::default())
        .unwrap_err();
    assert!(matches!(err.kind, EvalErrorKind::UnknownDef(_)), "{err}");
}

#[test]
fn reading_past_the_address_space_faults() {
    let p = compile_source(support::OCCURRENCES).unwrap();
    let err = Evaluator::new(&p)
        .run(ENTRY, &[0, 1, 0xffff_fffc], MachineState::default())
        .unwrap_err();
    assert!(
        matches!(
            err.kind,
            EvalErrorKind::State(StateFault::AddressOverflow { .. })
        ),
        "{err}"
    );
}

#[test]
fn trace_has_one_line_per_entry_and_exit() {
    let p = compile_source(support::OCCURRENCES).unwrap();
    let mut buf = Vec::new();
    Evaluator::new(&p)
        .trace(&mut buf)
        .run(ENTRY, &[399, 2, ARRAY], support::sample_state())
        .unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(
        lines[0].starts_with("> occurrences 399 2 32768 (st"),
        "{text}"
    );
    assert!(
        lines.last().unwrap().starts_with("< occurrences (st 0"),
        "{text}"
    );
    let enters = lines
        .iter()
        .filter(|l| l.trim_start().starts_with('>'))
        .count();
    let exits = lines
        .iter()
        .filter(|l| l.trim_start().starts_with('<'))
        .count();
    // Tail calls replace the caller, so only non-tail calls print an exit.
    assert_eq!((enters, exits), (10, 5), "{text}");
    assert!(
        lines.iter().any(|l| l
            .trim_start()
            .starts_with("> occurrences_step_0 0 0 0 32768 2 399")),
        "{text}"
    );
}

#[test]
fn loop_can_be_entered_directly() {
    let p = compile_source(support::OCCURRENCES).unwrap();
    let args = vec![
        Value::Nat(0),
        Value::Nat(10),
        Value::Nat(2),
        Value::Nat(ARRAY),
        Value::Nat(8),
        Value::Nat(399),
        Value::state(support::sample_state()),
    ];
    let out = Evaluator::new(&p).eval_def(WHILE_DEF, args).unwrap();
    let Value::Multi(vs) = out.value else {
        panic!("multiple values")
    };
    assert_eq!(vs.len(), 6);
    assert_eq!(vs[0], Value::Nat(13));
    assert_eq!(vs[1], Value::Nat(8));
}

#[test]
fn host_depth_is_bounded_by_the_call_structure() {
    let p = compile_source(support::OCCURRENCES).unwrap();
    let depth = |n| {
        Evaluator::new(&p)
            .run(ENTRY, &[0, n, ARRAY], support::sample_state())
            .unwrap()
            .1
            .max_depth
    };
    assert_eq!(depth(8), depth(20_000));
}
