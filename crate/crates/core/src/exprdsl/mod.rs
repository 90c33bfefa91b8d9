//! Arithmetic expression DSL used to define the two–variable map `F(x, y)`,
//! the recombination function `H(u, v, x, y)`, and closed-form reference
//! functions over `z`.
//!
//! The grammar is a small pure-arithmetic language with a fixed builtin
//! table: `sin cos exp ln sqrt abs min max pow logmean`. `logmean` is a
//! builtin because `(x - y)/(ln x - ln y)` is 0/0 on the diagonal and the
//! builtin supplies the continuous extension, keeping maps defined through
//! it total on the square.

mod ast;
mod eval;
mod parser;
mod token;

pub use ast::{print, BinOp, Builtin, ExprAst};
pub use eval::eval;
pub use parser::parse;
pub use token::{tokenize, Token, TokenKind};

use thiserror::Error;

/// Errors from tokenizing, parsing, or evaluating expressions. Offsets are
/// 0-based character offsets into the source text.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExprError {
    #[error("lexical error at offset {offset}: unexpected character `{found}`")]
    Lexical { offset: usize, found: char },

    #[error("malformed number literal at offset {offset}")]
    MalformedNumber { offset: usize },

    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("undeclared variable `{name}` at offset {offset}")]
    UndeclaredVariable { name: String, offset: usize },

    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },

    #[error("wrong arity for `{name}` at offset {offset}: expected {expected}, found {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        offset: usize,
    },

    #[error("domain error: {message}")]
    Domain { message: String },

    #[error("non-finite result while evaluating {expression}")]
    NonFinite { expression: String },

    #[error("variable `{name}` is not bound in the evaluation environment")]
    UnboundVariable { name: String },
}
