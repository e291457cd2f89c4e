use ctra_core::engine::{ExecutionError, ResultSet, ScalarValue};

use crate::eval::{OVal, OracleResult};

/// Relative tolerance for numbers, with an absolute floor near zero.
pub const REL_TOL: f64 = 1e-9;

pub(crate) fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1.0)
}

pub fn value_matches(engine: &ScalarValue, oracle: &OVal) -> bool {
    match (engine, oracle) {
        (ScalarValue::Null, OVal::Null) => true,
        (ScalarValue::Bool(a), OVal::Bool(b)) => a == b,
        (ScalarValue::Text(a), OVal::Text(b)) => a == b,
        (ScalarValue::Timestamp(a), OVal::Ts(b)) => a.timestamp_micros() == *b,
        (ScalarValue::Json(a), OVal::Json(b)) => a == b,
        (ScalarValue::Number(_), OVal::Num(b)) => close(engine.as_f64().unwrap(), *b),
        _ => false,
    }
}

fn row_matches(a: &[ScalarValue], b: &[OVal]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| value_matches(x, y))
}

/// Both sides fail, or both succeed with the same columns and the same rows
/// (in order, or failing that as a multiset).
pub fn results_match(
    engine: &Result<ResultSet, ExecutionError>,
    oracle: &Result<OracleResult, String>,
) -> Result<(), String> {
    let (e, o) = match (engine, oracle) {
        (Err(_), Err(_)) => return Ok(()),
        (Ok(_), Err(msg)) => return Err(format!("oracle failed ({msg}) but engine succeeded")),
        (Err(err), Ok(_)) => return Err(format!("engine failed ({err}) but oracle succeeded")),
        (Ok(e), Ok(o)) => (e, o),
    };
    let names: Vec<&str> = e.columns.iter().map(|c| c.name.as_str()).collect();
    if names != o.columns.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(format!("column names differ: {names:?} vs {:?}", o.columns));
    }
    if e.rows.len() != o.rows.len() {
        return Err(format!("row counts differ: {} vs {}", e.rows.len(), o.rows.len()));
    }
    if e.rows.iter().zip(&o.rows).all(|(a, b)| row_matches(a, b)) {
        return Ok(());
    }
    let mut used = vec![false; o.rows.len()];
    for (i, row) in e.rows.iter().enumerate() {
        let hit = o
            .rows
            .iter()
            .enumerate()
            .position(|(j, other)| !used[j] && row_matches(row, other));
        match hit {
            Some(j) => used[j] = true,
            None => return Err(format!("engine row {i} {row:?} has no oracle counterpart")),
        }
    }
    Ok(())
}
