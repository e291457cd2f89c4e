//! Lab-operations analytics pipeline: synthetic `jobs` data, a constrained
//! SQL front end and engine, an LLM gateway, the agent graph, and reports.

pub mod datastore;
pub mod engine;
pub mod graph;
pub mod insights;
pub mod llm;
pub mod sql;
