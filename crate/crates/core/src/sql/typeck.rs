//! Type inference and name resolution shared by the linter and the engine's
//! binder, so that a query the linter accepts always binds.

use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::ast::*;
use super::lint::LintCategory;
use crate::datastore::{DataType, TableSchema, Timestamp};

pub const DAY_PATTERN: &str = "YYYY-MM-DD";
pub const WEEK_PATTERN: &str = "YYYY-\"W\"WW";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SqlType {
    Text,
    Number,
    Timestamp,
    Json,
    Bool,
    /// An untyped string literal, coerced by context.
    Unknown,
    Null,
}

impl SqlType {
    pub fn name(self) -> &'static str {
        match self {
            SqlType::Text => "text",
            SqlType::Number => "numeric",
            SqlType::Timestamp => "timestamp with time zone",
            SqlType::Json => "jsonb",
            SqlType::Bool => "boolean",
            SqlType::Unknown | SqlType::Null => "unknown",
        }
    }

    fn of(data_type: DataType) -> SqlType {
        match data_type {
            DataType::Varchar => SqlType::Text,
            DataType::TimestampTz => SqlType::Timestamp,
            DataType::Jsonb => SqlType::Json,
        }
    }
}

/// Accepts RFC 3339 and the common PostgreSQL input forms; values without
/// an offset are taken as UTC.
pub fn parse_timestamp_literal(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(s) {
        return Some(ts);
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f%:z", "%Y-%m-%d %H:%M:%S%.f%#z"] {
        if let Ok(ts) = DateTime::parse_from_str(s, fmt) {
            return Some(ts);
        }
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%d %H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(naive.and_utc().fixed_offset());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc().fixed_offset())
}

pub(crate) fn parse_number_text(s: &str) -> Option<Decimal> {
    let s = s.trim();
    if s.contains(['e', 'E']) {
        Decimal::from_scientific(s).ok()
    } else {
        Decimal::from_str(s).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct TypeError {
    pub category: LintCategory,
    pub message: String,
    pub suggestion: Option<String>,
}

impl TypeError {
    fn new(category: LintCategory, message: String, suggestion: Option<String>) -> Self {
        TypeError {
            category,
            message,
            suggestion,
        }
    }

    fn mismatch(message: String, suggestion: Option<&str>) -> Self {
        TypeError::new(LintCategory::TypeMismatch, message, suggestion.map(str::to_string))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Clause {
    Select,
    Where,
    GroupBy,
    OrderBy,
}

impl Clause {
    fn name(self) -> &'static str {
        match self {
            Clause::Select => "SELECT",
            Clause::Where => "WHERE",
            Clause::GroupBy => "GROUP BY",
            Clause::OrderBy => "ORDER BY",
        }
    }
}

pub(crate) fn column_type(schema: &TableSchema, name: &str) -> Result<SqlType, TypeError> {
    match schema.column(name) {
        Some(def) => Ok(SqlType::of(def.data_type)),
        None => Err(unknown_column(schema, name)),
    }
}

pub(crate) fn nearest_column<'s>(schema: &'s TableSchema, name: &str) -> Option<&'s str> {
    let lower = name.to_ascii_lowercase();
    let mut best: Option<(usize, &str)> = None;
    for candidate in schema.column_names() {
        let d = strsim::levenshtein(&lower, candidate);
        if d <= 3 && best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, candidate));
        }
    }
    best.map(|(_, c)| c)
}

fn unknown_column(schema: &TableSchema, name: &str) -> TypeError {
    let suggestion = match nearest_column(schema, name) {
        Some(c) => format!("Use valid column '{c}' instead of '{name}'"),
        None => format!(
            "Use only columns from the {} schema: {}",
            schema.table_name,
            schema.column_names().collect::<Vec<_>>().join(", ")
        ),
    };
    TypeError::new(
        LintCategory::UnknownColumn,
        format!("column \"{name}\" does not exist"),
        Some(suggestion),
    )
}

/// Checks that a bare string literal converts to `target`.
pub(crate) fn coerce_literal(e: &Expr, target: SqlType) -> Result<(), TypeError> {
    let Expr::Literal(Literal::Text(s)) = e else {
        return Ok(());
    };
    let ok = match target {
        SqlType::Number => parse_number_text(s).is_some(),
        SqlType::Timestamp => parse_timestamp_literal(s).is_some(),
        SqlType::Json => serde_json::from_str::<serde_json::Value>(s).is_ok(),
        SqlType::Bool => matches!(s.to_ascii_lowercase().as_str(), "true" | "false"),
        SqlType::Text | SqlType::Unknown | SqlType::Null => true,
    };
    if ok {
        Ok(())
    } else {
        Err(TypeError::mismatch(
            format!("invalid input syntax for type {}: \"{s}\"", target.name()),
            None,
        ))
    }
}

/// The common type of two operands compared or merged together, if any.
pub(crate) fn common_type(a: SqlType, b: SqlType) -> Option<SqlType> {
    use SqlType::*;
    match (a, b) {
        (Null, Null) | (Unknown, Unknown) | (Unknown, Null) | (Null, Unknown) => Some(Text),
        (Null, t) | (t, Null) | (Unknown, t) | (t, Unknown) => Some(t),
        (x, y) if x == y => Some(x),
        _ => None,
    }
}

pub(crate) fn infer(e: &Expr, schema: &TableSchema, clause: Clause) -> Result<SqlType, TypeError> {
    infer_in(e, schema, clause, false)
}

fn infer_in(e: &Expr, schema: &TableSchema, clause: Clause, in_aggregate: bool) -> Result<SqlType, TypeError> {
    let sub = |x: &Expr| infer_in(x, schema, clause, in_aggregate);
    match e {
        Expr::Column(name) => column_type(schema, name),
        Expr::Literal(Literal::Text(_)) => Ok(SqlType::Unknown),
        Expr::Literal(Literal::Number(_)) => Ok(SqlType::Number),
        Expr::Literal(Literal::Null) => Ok(SqlType::Null),
        Expr::Negate(x) => match sub(x)? {
            SqlType::Number | SqlType::Null => Ok(SqlType::Number),
            t => Err(TypeError::mismatch(
                format!("operator does not exist: - {}", t.name()),
                Some("Apply unary minus only to numeric expressions"),
            )),
        },
        Expr::Binary { op, left, right } => {
            let lt = sub(left)?;
            let rt = sub(right)?;
            if op.is_arithmetic() {
                arithmetic_type(*op, left, lt, right, rt)
            } else if op.is_comparison() {
                comparison_check(*op, left, lt, right, rt)?;
                Ok(SqlType::Bool)
            } else {
                for t in [lt, rt] {
                    if !matches!(t, SqlType::Bool | SqlType::Null) {
                        return Err(TypeError::mismatch(
                            format!(
                                "argument of {} must be type boolean, not type {}",
                                op.symbol(),
                                t.name()
                            ),
                            None,
                        ));
                    }
                }
                Ok(SqlType::Bool)
            }
        }
        Expr::IsNull { expr, .. } => {
            sub(expr)?;
            Ok(SqlType::Bool)
        }
        Expr::Aggregate { func, arg } => {
            if in_aggregate {
                return Err(TypeError::new(
                    LintCategory::AggregateMisuse,
                    "aggregate function calls cannot be nested".into(),
                    Some("Compute the inner aggregate per group and aggregate only once".into()),
                ));
            }
            if matches!(clause, Clause::Where | Clause::GroupBy) {
                return Err(TypeError::new(
                    LintCategory::AggregateMisuse,
                    format!("aggregate functions are not allowed in {}", clause.name()),
                    Some(format!("Move {} out of the {} clause", func.name(), clause.name())),
                ));
            }
            let AggregateArg::Expr(inner) = arg else {
                return Ok(SqlType::Number);
            };
            let t = infer_in(inner, schema, clause, true)?;
            match (func, t) {
                (AggregateFunc::Count, _) => Ok(SqlType::Number),
                (AggregateFunc::Sum | AggregateFunc::Avg, SqlType::Number) => Ok(SqlType::Number),
                (AggregateFunc::Min | AggregateFunc::Max, SqlType::Number | SqlType::Text | SqlType::Timestamp) => {
                    Ok(t)
                }
                (AggregateFunc::Min | AggregateFunc::Max, SqlType::Unknown) => Ok(SqlType::Text),
                _ => Err(TypeError::mismatch(
                    format!(
                        "function {}({}) does not exist",
                        func.name().to_ascii_lowercase(),
                        t.name()
                    ),
                    Some("Cast the argument to a number, e.g. COALESCE(col->>'key', '0')::FLOAT"),
                )),
            }
        }
        Expr::Coalesce(args) => {
            let mut types = Vec::with_capacity(args.len());
            for a in args {
                types.push(sub(a)?);
            }
            let mut common = SqlType::Null;
            for (i, &t) in types.iter().enumerate() {
                common = common_type(common, t).ok_or_else(|| {
                    TypeError::mismatch(
                        format!("COALESCE types {} and {} cannot be matched", common.name(), t.name()),
                        Some(coalesce_hint(&args[i])),
                    )
                })?;
            }
            if matches!(common, SqlType::Null | SqlType::Unknown) {
                common = SqlType::Text;
            }
            for a in args {
                coerce_literal(a, common)?;
            }
            Ok(common)
        }
        Expr::ToChar { expr, pattern } => {
            let t = sub(expr)?;
            if !matches!(t, SqlType::Timestamp | SqlType::Null) {
                return Err(TypeError::mismatch(
                    format!("function to_char({}, unknown) does not exist", t.name()),
                    Some("Apply TO_CHAR only to timestamp columns"),
                ));
            }
            if pattern != DAY_PATTERN && pattern != WEEK_PATTERN {
                return Err(TypeError::mismatch(
                    format!("unsupported TO_CHAR format '{pattern}'"),
                    Some(
                        "Use TO_CHAR(col, 'YYYY-MM-DD') for daily or TO_CHAR(col, 'YYYY-\"W\"WW') for weekly grouping",
                    ),
                ));
            }
            Ok(SqlType::Text)
        }
        Expr::ExtractEpoch { end, start } => {
            for x in [end, start] {
                let t = sub(x)?;
                match t {
                    SqlType::Timestamp | SqlType::Null => {}
                    SqlType::Unknown => coerce_literal(x, SqlType::Timestamp)?,
                    _ => {
                        return Err(TypeError::mismatch(
                            format!(
                                "EXTRACT(EPOCH FROM ...) needs a difference of timestamps, found {}",
                                t.name()
                            ),
                            Some("Use EXTRACT(EPOCH FROM (timestamp2 - timestamp1))"),
                        ))
                    }
                }
            }
            Ok(SqlType::Number)
        }
        Expr::JsonAccess { column, as_text, .. } => match column_type(schema, column)? {
            SqlType::Json => Ok(if *as_text { SqlType::Text } else { SqlType::Json }),
            t => Err(TypeError::new(
                LintCategory::JsonbAccess,
                format!(
                    "operator does not exist: {} {} unknown",
                    t.name(),
                    if *as_text { "->>" } else { "->" }
                ),
                Some(format!("Use -> and ->> only on JSONB columns; '{column}' is not JSONB")),
            )),
        },
        Expr::Cast { expr, target } => {
            let t = sub(expr)?;
            match t {
                SqlType::Number | SqlType::Text | SqlType::Json | SqlType::Null => Ok(SqlType::Number),
                SqlType::Unknown => {
                    coerce_literal(expr, SqlType::Number)?;
                    Ok(SqlType::Number)
                }
                _ => Err(TypeError::mismatch(
                    format!("cannot cast type {} to {}", t.name(), target.sql_name()),
                    Some("Use EXTRACT(EPOCH FROM (timestamp2 - timestamp1)) for durations"),
                )),
            }
        }
    }
}

fn coalesce_hint(arg: &Expr) -> &'static str {
    match arg {
        Expr::Literal(Literal::Number(_)) => "Use a quoted default for text values, e.g. COALESCE(col->>'key', '0')",
        _ => "Make all COALESCE arguments the same type",
    }
}

fn arithmetic_type(op: BinaryOp, left: &Expr, lt: SqlType, right: &Expr, rt: SqlType) -> Result<SqlType, TypeError> {
    use SqlType::*;
    match (lt, rt) {
        (Number | Null, Number | Null) => Ok(Number),
        (Number, Unknown) => coerce_literal(right, Number).map(|_| Number),
        (Unknown, Number) => coerce_literal(left, Number).map(|_| Number),
        (Timestamp, Timestamp) if op == BinaryOp::Sub => Err(TypeError::mismatch(
            "timestamp subtraction yields an interval, which cannot be returned or compared".into(),
            Some("Wrap the difference as EXTRACT(EPOCH FROM (timestamp2 - timestamp1))"),
        )),
        _ => Err(TypeError::mismatch(
            format!("operator does not exist: {} {} {}", lt.name(), op.symbol(), rt.name()),
            Some("Cast text values with ::FLOAT before arithmetic"),
        )),
    }
}

fn comparison_check(op: BinaryOp, left: &Expr, lt: SqlType, right: &Expr, rt: SqlType) -> Result<(), TypeError> {
    if lt == SqlType::Json || rt == SqlType::Json {
        return Err(TypeError::new(
            LintCategory::JsonbAccess,
            "jsonb values cannot be compared directly".into(),
            Some("Extract a top-level key with ->> before comparing".into()),
        ));
    }
    match common_type(lt, rt) {
        Some(t) => {
            coerce_literal(left, t)?;
            coerce_literal(right, t)
        }
        None => Err(TypeError::mismatch(
            format!("operator does not exist: {} {} {}", lt.name(), op.symbol(), rt.name()),
            Some("Compare values of the same type; cast text with ::FLOAT for numeric comparisons"),
        )),
    }
}

/// A query aggregates when it has GROUP BY or any aggregate in SELECT or
/// ORDER BY.
pub(crate) fn is_grouped(q: &QueryAst) -> bool {
    !q.group_by.is_empty()
        || q.select_items.iter().any(|s| s.expr.contains_aggregate())
        || q.order_by.iter().any(|o| o.expr.contains_aggregate())
}

fn ordinal(e: &Expr) -> Option<Result<usize, ()>> {
    match e {
        Expr::Literal(Literal::Number(d)) => Some(if d.fract().is_zero() && *d >= Decimal::ONE {
            usize::try_from(d.trunc().mantissa()).map_err(|_| ())
        } else {
            Err(())
        }),
        Expr::Literal(_) => Some(Err(())),
        _ => None,
    }
}

fn bad_reference(message: String) -> TypeError {
    TypeError::new(LintCategory::InvalidReference, message, None)
}

/// GROUP BY keys with ordinals and output aliases replaced by the select
/// expressions they name. Input columns win over aliases.
pub(crate) fn resolve_group_keys(q: &QueryAst, schema: &TableSchema) -> Result<Vec<Expr>, TypeError> {
    let mut keys = Vec::with_capacity(q.group_by.len());
    for g in &q.group_by {
        let resolved = match ordinal(g) {
            Some(Ok(n)) if n <= q.select_items.len() => q.select_items[n - 1].expr.clone(),
            Some(Ok(n)) => return Err(bad_reference(format!("GROUP BY position {n} is not in select list"))),
            Some(Err(())) => return Err(bad_reference("non-integer constant in GROUP BY".into())),
            None => match g {
                Expr::Column(name) if schema.column(name).is_none() => {
                    let named: Vec<&SelectItem> = q.select_items.iter().filter(|s| s.output_name() == *name).collect();
                    match named.as_slice() {
                        [] => g.clone(),
                        [one] => one.expr.clone(),
                        _ => return Err(bad_reference(format!("GROUP BY \"{name}\" is ambiguous"))),
                    }
                }
                _ => g.clone(),
            },
        };
        if resolved.contains_aggregate() {
            return Err(TypeError::new(
                LintCategory::AggregateMisuse,
                "aggregate functions are not allowed in GROUP BY".into(),
                Some("Group by the plain column and aggregate in SELECT".into()),
            ));
        }
        keys.push(resolved);
    }
    Ok(keys)
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum OrderTarget {
    /// Sort by an output column, by index.
    Output(usize),
    /// Sort by an expression over the input (or group) rows.
    Input(Expr),
}

/// ORDER BY keys: ordinals and output names refer to select items, anything
/// else is an expression over the input.
pub(crate) fn resolve_order(q: &QueryAst) -> Result<Vec<(OrderTarget, SortDirection)>, TypeError> {
    let mut out = Vec::with_capacity(q.order_by.len());
    for o in &q.order_by {
        let target = match ordinal(&o.expr) {
            Some(Ok(n)) if n <= q.select_items.len() => OrderTarget::Output(n - 1),
            Some(Ok(n)) => return Err(bad_reference(format!("ORDER BY position {n} is not in select list"))),
            Some(Err(())) => return Err(bad_reference("non-integer constant in ORDER BY".into())),
            None => match &o.expr {
                Expr::Column(name) => {
                    let hits: Vec<usize> = q
                        .select_items
                        .iter()
                        .enumerate()
                        .filter(|(_, s)| s.output_name() == *name)
                        .map(|(i, _)| i)
                        .collect();
                    match hits.as_slice() {
                        [] => OrderTarget::Input(o.expr.clone()),
                        [i] => OrderTarget::Output(*i),
                        _ => return Err(bad_reference(format!("ORDER BY \"{name}\" is ambiguous"))),
                    }
                }
                e => OrderTarget::Input(e.clone()),
            },
        };
        out.push((target, o.direction));
    }
    Ok(out)
}

/// The first column reference in `e` that is neither a group key nor inside
/// an aggregate.
pub(crate) fn ungrouped<'e>(e: &'e Expr, keys: &[Expr]) -> Option<&'e Expr> {
    if keys.contains(e) {
        return None;
    }
    match e {
        Expr::Aggregate { .. } => None,
        Expr::Column(_) | Expr::JsonAccess { .. } => Some(e),
        _ => e.children().into_iter().find_map(|c| ungrouped(c, keys)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::parse;

    fn ty(sql_expr: &str) -> Result<SqlType, TypeError> {
        let q = parse(&format!("SELECT {sql_expr}, 1 FROM jobs")).unwrap();
        infer(&q.select_items[0].expr, &TableSchema::jobs(), Clause::Select)
    }

    #[test]
    fn basic_types() {
        assert_eq!(ty("state").unwrap(), SqlType::Text);
        assert_eq!(ty("created_timestamp").unwrap(), SqlType::Timestamp);
        assert_eq!(ty("outputs->>'error_log_count'").unwrap(), SqlType::Text);
        assert_eq!(ty("outputs->'error_log_count'").unwrap(), SqlType::Json);
        assert_eq!(ty("COALESCE(outputs->>'x', '0')::FLOAT").unwrap(), SqlType::Number);
        assert_eq!(ty("TO_CHAR(created_timestamp, 'YYYY-MM-DD')").unwrap(), SqlType::Text);
        assert_eq!(ty("MIN(completed_timestamp)").unwrap(), SqlType::Timestamp);
        assert_eq!(
            ty("EXTRACT(EPOCH FROM ('2024-01-01T01:00:00Z' - '2024-01-01T00:00:00Z'))").unwrap(),
            SqlType::Number
        );
    }

    #[test]
    fn mismatches() {
        assert_eq!(ty("state + 1").unwrap_err().category, LintCategory::TypeMismatch);
        assert_eq!(ty("AVG(state)").unwrap_err().category, LintCategory::TypeMismatch);
        assert_eq!(
            ty("COALESCE(outputs->>'x', 0)").unwrap_err().category,
            LintCategory::TypeMismatch
        );
        assert_eq!(ty("state->>'x'").unwrap_err().category, LintCategory::JsonbAccess);
        assert_eq!(ty("SUM(COUNT(*))").unwrap_err().category, LintCategory::AggregateMisuse);
        assert_eq!(
            ty("'abc'::FLOAT").unwrap_err().message,
            "invalid input syntax for type numeric: \"abc\""
        );
        assert_eq!(
            ty("TO_CHAR(created_timestamp, 'MM')").unwrap_err().category,
            LintCategory::TypeMismatch
        );
        assert_eq!(
            ty("completed_timestamp - started_timestamp").unwrap_err().category,
            LintCategory::TypeMismatch
        );
    }

    #[test]
    fn unknown_column_suggests_nearest() {
        let e = ty("status").unwrap_err();
        assert_eq!(e.category, LintCategory::UnknownColumn);
        assert_eq!(
            e.suggestion.as_deref(),
            Some("Use valid column 'state' instead of 'status'")
        );
        let e = ty("execution_timestamp").unwrap_err();
        assert!(e.suggestion.unwrap().starts_with("Use only columns"));
    }

    #[test]
    fn timestamp_literals() {
        assert!(parse_timestamp_literal("2024-01-01T00:00:00Z").is_some());
        assert!(parse_timestamp_literal("2024-01-01 10:00:00+02").is_some());
        assert_eq!(
            parse_timestamp_literal("2024-01-02").unwrap().timestamp(),
            1_704_153_600
        );
        assert!(parse_timestamp_literal("yesterday").is_none());
    }

    #[test]
    fn group_and_order_resolution() {
        let q = parse("SELECT state AS s, COUNT(*) AS n FROM jobs GROUP BY s ORDER BY n DESC, 1").unwrap();
        let keys = resolve_group_keys(&q, &TableSchema::jobs()).unwrap();
        assert_eq!(keys, vec![Expr::column("state")]);
        let order = resolve_order(&q).unwrap();
        assert_eq!(order[0].0, OrderTarget::Output(1));
        assert_eq!(order[1].0, OrderTarget::Output(0));
        let q = parse("SELECT state, COUNT(*) FROM jobs GROUP BY 3").unwrap();
        assert_eq!(
            resolve_group_keys(&q, &TableSchema::jobs()).unwrap_err().category,
            LintCategory::InvalidReference
        );
    }

    #[test]
    fn ungrouped_reference() {
        let keys = vec![Expr::column("state")];
        let q = parse("SELECT lab_id, COUNT(*) FROM jobs").unwrap();
        assert_eq!(ungrouped(&q.select_items[0].expr, &keys), Some(&Expr::column("lab_id")));
        assert_eq!(ungrouped(&q.select_items[1].expr, &keys), None);
    }
}
