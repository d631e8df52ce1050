//! Front end for LLVM textual IR: tokenizer, parser, alias resolution and a
//! printer for the accepted subset.
//!
//! Accepted subset (anything else is an "unsupported construct" error):
//!
//! * integer types `i1 i8 i16 i32 i64`, addresses (`ptr` or typed `T*`);
//! * `add sub mul and or xor shl lshr ashr`, `icmp` with all ten integer
//!   predicates, `zext sext trunc`, `select`;
//! * single-index `getelementptr`, `load`, `store`, `alloca`;
//! * `phi`, both forms of `br`, `ret`, and direct `call`;
//! * `@x = alias ...` between functions.
//!
//! Attributes, metadata, alignment and calling conventions are accepted and
//! dropped.

pub mod alias;
pub mod ast;
pub mod lexer;
pub mod parser;
pub mod print;

use std::fmt;

pub use alias::resolve_aliases;
pub use ast::*;
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse_module;
pub use print::print_module;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lex,
    /// Text that is not valid IR.
    Malformed,
    /// Valid IR outside the supported subset.
    Unsupported,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Lex => "lex error",
            ParseErrorKind::Malformed => "parse error",
            ParseErrorKind::Unsupported => "unsupported construct",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {kind}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub message: String,
    pub pos: Pos,
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, message: impl Into<String>, pos: Pos) -> Self {
        ParseError {
            kind,
            message: message.into(),
            pos,
        }
    }
}

/// Tokenize, parse and resolve aliases in one step.
pub fn parse_source(source: &str) -> Result<LlvmModule, ParseError> {
    let tokens = tokenize(source)?;
    let module = parse_module(&tokens)?;
    resolve_aliases(module)
}
