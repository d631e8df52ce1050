//! The functional form: its syntax tree, the translator that produces it, a
//! printer and loader for its s-expression text, and a static checker.

pub mod emit;
pub mod ir;
pub mod load;
pub mod mangle;
pub mod sexpr;
pub mod translate;
pub mod validate;

pub use emit::{emit_def, emit_program};
pub use ir::{Expr, FunDef, FunProgram, Kind, PrimOp, Recursion};
pub use load::{load_program, LoadError};
pub use mangle::{block_def_name, mangle_ident, RegisterNames};
pub use sexpr::{read_all, SExpr};
pub use translate::{translate_function, translate_module, CalleeSig, Summary, Translation};
pub use validate::{
    check_calls, check_cliques, check_closed_terms, check_state_threading, validate_program,
    Clique, ValidationError,
};
