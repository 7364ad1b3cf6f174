//! VPL: the restricted imperative language programs are written in.
//!
//! Surface syntax is a closed subset of Python (one `execute_command`
//! function over the `ImagePatch` API). The module provides the lexer,
//! parser, pretty-printer, normalizer, and grammar-derivation machinery.
//! The grammar reference lives in `docs/grammar.md`.

pub mod ast;
pub mod deriv;
pub mod lex;
mod normalize;
mod parse;
mod pretty;

pub use normalize::{normalize, NormalizedAst};
pub use parse::parse;
pub use pretty::pretty_print;

use serde::{Deserialize, Serialize};

/// Any deviation from the VPL grammar, carrying the source position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("parse error at {line}:{column}: expected {expected}, found {found}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub expected: String,
    pub found: String,
}
