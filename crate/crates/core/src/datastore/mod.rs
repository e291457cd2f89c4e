//! The `jobs` data model, dataset files, the synthetic corpus, and query
//! execution behind a backend-agnostic trait.

mod io;
mod record;
mod schema;
mod synth;

use thiserror::Error;

pub use io::{load_dataset, read_csv, read_jsonl, to_jsonl_string, write_csv, write_jsonl, DatasetFormat};
pub use record::{format_timestamp, parse_timestamp, CellRef, JobRecord, JobState, Timestamp};
pub use schema::{Column, ColumnDef, DataType, TableSchema};
pub use synth::{generate_synthetic, ErrorProfile, GenerationProfile, StateProfile};

use crate::engine::{self, ExecutionError, ResultSet};
use crate::sql::QueryAst;

pub type JsonValue = serde_json::Value;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: malformed record: {message}")]
    Malformed { row: usize, message: String },
    #[error("row {row}, column {column}: {reason}")]
    SchemaViolation { row: usize, column: String, reason: String },
    #[error("invalid generation profile: {0}")]
    InvalidProfile(String),
}

/// Anything that can answer a linted query.
pub trait QueryBackend: Send + Sync {
    fn execute(&self, query: &QueryAst) -> Result<ResultSet, ExecutionError>;
}

/// The reference backend: evaluates queries over records held in memory.
#[derive(Debug, Clone, Default)]
pub struct InMemoryBackend {
    records: Vec<JobRecord>,
}

impl InMemoryBackend {
    pub fn new(records: Vec<JobRecord>) -> Self {
        InMemoryBackend { records }
    }

    pub fn records(&self) -> &[JobRecord] {
        &self.records
    }
}

impl QueryBackend for InMemoryBackend {
    fn execute(&self, query: &QueryAst) -> Result<ResultSet, ExecutionError> {
        execute(query, &self.records)
    }
}

pub fn execute(query: &QueryAst, data: &[JobRecord]) -> Result<ResultSet, ExecutionError> {
    engine::evaluate(query, data)
}
