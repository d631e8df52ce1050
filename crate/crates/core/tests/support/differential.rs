//! Translated programs against the reference interpreter.

use ll2fun::ll::{parse_source, print_module};
use ll2fun::{translate_source, Evaluator, Program};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gen::{random_inputs, Gen};
use super::interp::Interp;

const INPUTS_PER_PROGRAM: usize = 4;

/// Generate, translate and run one program against the interpreter.
pub fn check(seed: u64, loop_: bool) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gen = Gen::new(&mut rng);
    let source = if loop_ {
        gen.single_loop()
    } else {
        gen.straight_line()
    };
    let fail = |what: String| {
        format!(
            "seed {seed} ({}): {what}\n{source}",
            if loop_ { "loop" } else { "straight" }
        )
    };

    let module = parse_source(&source).map_err(|e| fail(format!("parse: {e}")))?;
    let reparsed =
        parse_source(&print_module(&module)).map_err(|e| fail(format!("reparse: {e}")))?;
    if reparsed.without_positions() != module.without_positions() {
        return Err(fail("printed module reparses differently".into()));
    }
    let translation = translate_source(&source).map_err(|e| fail(format!("translate: {e}")))?;
    let program =
        Program::compile(&translation.program).map_err(|e| fail(format!("compile: {e}")))?;

    for _ in 0..INPUTS_PER_PROGRAM {
        let (args, st) = random_inputs(&mut rng);
        let mut expected = st.clone();
        let wide: Vec<u64> = args.iter().map(|&a| a as u64).collect();
        Interp::new(&module, 1 << 16)
            .call("f", &wide, &mut expected)
            .map_err(|e| fail(format!("interpreter: {e}")))?;
        let (got, _) = Evaluator::new(&program)
            .budget(Some(1 << 16))
            .run("f", &args, st)
            .map_err(|e| fail(format!("evaluator on {args:x?}: {e}")))?;
        if got.retval != expected.retval {
            return Err(fail(format!(
                "args {args:x?}: retval {:#x}, expected {:#x}",
                got.retval, expected.retval
            )));
        }
        if got.mem != expected.mem {
            return Err(fail(format!(
                "args {args:x?}: memory differs at {:?}",
                got.mem.diff(&expected.mem)
            )));
        }
        if (got.stack, got.frame) != (expected.stack, expected.frame) {
            return Err(fail(format!(
                "args {args:x?}: stack/frame registers differ"
            )));
        }
    }
    Ok(())
}
