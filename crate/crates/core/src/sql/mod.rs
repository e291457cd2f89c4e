//! Lexing, parsing, rendering, and linting of the constrained SELECT subset.

mod ast;
mod lexer;
mod lint;
mod parser;
mod render;
pub(crate) mod typeck;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use ast::*;
pub use lint::{lint, lint_findings, lint_sql, Finding, LintCategory, ValidationReport};
pub use parser::parse;
pub use render::{render, render_expr};
pub use typeck::{parse_timestamp_literal, SqlType, DAY_PATTERN, WEEK_PATTERN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseErrorKind {
    Syntax,
    Empty,
    Cte,
    Subquery,
    WindowFunction,
    NestedJsonAccess,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the source text.
    pub offset: usize,
    pub message: String,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at offset {}: {}", self.offset, self.message)
    }
}

impl std::error::Error for ParseError {}
