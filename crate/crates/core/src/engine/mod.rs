//! In-memory evaluation of linted queries over `JobRecord`s with
//! PostgreSQL-compatible semantics for the supported subset.

mod exec;
mod value;

use std::fmt;

use serde::Serialize;

pub use exec::evaluate;
pub(crate) use value::GroupKey;
pub use value::ScalarValue;

use crate::sql::SqlType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Bind,
    Evaluate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionError {
    pub message: String,
    pub phase: Phase,
}

impl ExecutionError {
    pub(crate) fn bind(message: impl Into<String>) -> Self {
        ExecutionError {
            message: message.into(),
            phase: Phase::Bind,
        }
    }

    pub(crate) fn eval(message: impl Into<String>) -> Self {
        ExecutionError {
            message: message.into(),
            phase: Phase::Evaluate,
        }
    }
}

impl fmt::Display for ExecutionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ExecutionError {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResultColumn {
    pub name: String,
    pub kind: SqlType,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultSet {
    pub columns: Vec<ResultColumn>,
    pub rows: Vec<Vec<ScalarValue>>,
}

impl ResultSet {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }
}
