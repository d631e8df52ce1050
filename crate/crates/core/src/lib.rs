//! Translation of LLVM textual IR into a first-order functional form, with
//! an evaluator for that form over a byte-addressed machine state.
//!
//! The pipeline is [`ll::parse_source`], then [`fun::translate_module`],
//! then [`fun::emit_program`] or [`eval::Program::compile`].

pub mod analysis;
pub mod eval;
pub mod fun;
pub mod ll;
pub mod oracle;
pub mod state;

pub use analysis::AnalysisError;
pub use eval::{EvalError, EvalOptions, Evaluator, Program, Value};
pub use fun::{FunProgram, LoadError, Translation, ValidationError};
pub use ll::ParseError;
pub use state::{ByteMemory, MachineState};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Analysis(#[from] AnalysisError),
    #[error("{0}")]
    Load(#[from] LoadError),
    #[error("invalid program: {0}")]
    Validation(#[from] ValidationError),
    #[error("{0}")]
    Compile(#[from] eval::CompileError),
    #[error("{0}")]
    Eval(#[from] EvalError),
}

/// Parse `.ll` source, translate it and check the result.
pub fn translate_source(source: &str) -> Result<Translation, Error> {
    let module = ll::parse_source(source)?;
    let t = fun::translate_module(&module)?;
    fun::validate_program(&t.program)?;
    Ok(t)
}

/// Parse `.ll` source and compile its translation for execution.
pub fn compile_source(source: &str) -> Result<Program, Error> {
    Ok(Program::compile(&translate_source(source)?.program)?)
}

/// Load and check functional-form text, then compile it.
pub fn load_and_compile(text: &str) -> Result<(FunProgram, Program), Error> {
    let p = fun::load_program(text)?;
    fun::validate_program(&p)?;
    let compiled = Program::compile(&p)?;
    Ok((p, compiled))
}
