//! Test-only reference implementation of query evaluation, plus seeded
//! generators used to compare it with the engine.

mod compare;
mod eval;
mod gen;

pub use compare::{results_match, value_matches, REL_TOL};
pub use eval::{oracle_evaluate, OVal, OracleResult, MAX_ROWS};
pub use gen::{random_dataset, random_query};
