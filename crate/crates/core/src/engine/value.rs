use std::cmp::Ordering;
use std::fmt;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::Serialize;

use crate::datastore::{format_timestamp, JsonValue, Timestamp};

/// One SQL value.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ScalarValue {
    Null,
    Bool(bool),
    Text(String),
    Number(Decimal),
    Timestamp(Timestamp),
    Json(JsonValue),
}

impl ScalarValue {
    pub fn is_null(&self) -> bool {
        matches!(self, ScalarValue::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ScalarValue::Number(d) => d.to_f64(),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            ScalarValue::Text(s) => Some(s),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            ScalarValue::Null => 0,
            ScalarValue::Bool(_) => 1,
            ScalarValue::Number(_) => 2,
            ScalarValue::Text(_) => 3,
            ScalarValue::Timestamp(_) => 4,
            ScalarValue::Json(_) => 5,
        }
    }

    /// Total order used for sorting and MIN/MAX. Nulls sort lowest here;
    /// callers place them according to the sort direction.
    pub fn total_cmp(&self, other: &ScalarValue) -> Ordering {
        use ScalarValue::*;
        match (self, other) {
            (Null, Null) => Ordering::Equal,
            (Bool(a), Bool(b)) => a.cmp(b),
            (Number(a), Number(b)) => a.cmp(b),
            (Text(a), Text(b)) => a.as_bytes().cmp(b.as_bytes()),
            (Timestamp(a), Timestamp(b)) => a.cmp(b),
            (Json(a), Json(b)) => a.to_string().cmp(&b.to_string()),
            (a, b) => a.rank().cmp(&b.rank()),
        }
    }
}

impl fmt::Display for ScalarValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarValue::Null => f.write_str("NULL"),
            ScalarValue::Bool(b) => f.write_str(if *b { "true" } else { "false" }),
            ScalarValue::Text(s) => f.write_str(s),
            ScalarValue::Number(d) => write!(f, "{d}"),
            ScalarValue::Timestamp(ts) => f.write_str(&format_timestamp(ts)),
            ScalarValue::Json(v) => write!(f, "{v}"),
        }
    }
}

/// Hashable grouping identity: text by bytes, numbers by value, timestamps
/// by instant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) enum GroupKey {
    Null,
    Bool(bool),
    Text(String),
    Number(Decimal),
    Instant(i64),
    Json(String),
}

impl From<&ScalarValue> for GroupKey {
    fn from(v: &ScalarValue) -> Self {
        match v {
            ScalarValue::Null => GroupKey::Null,
            ScalarValue::Bool(b) => GroupKey::Bool(*b),
            ScalarValue::Text(s) => GroupKey::Text(s.clone()),
            ScalarValue::Number(d) => GroupKey::Number(d.normalize()),
            ScalarValue::Timestamp(ts) => GroupKey::Instant(ts.timestamp_micros()),
            ScalarValue::Json(j) => GroupKey::Json(j.to_string()),
        }
    }
}
