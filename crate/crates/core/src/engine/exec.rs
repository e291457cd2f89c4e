use std::cmp::Ordering;

use chrono::{Datelike, Utc};
use indexmap::IndexMap;
use rust_decimal::Decimal;

use super::{ExecutionError, GroupKey, ResultColumn, ResultSet, ScalarValue};
use crate::datastore::{CellRef, Column, JobRecord, JsonValue, TableSchema};
use crate::sql::typeck::{
    common_type, infer, is_grouped, parse_number_text, resolve_group_keys, resolve_order, Clause, OrderTarget,
    TypeError,
};
use crate::sql::{
    parse_timestamp_literal, AggregateArg, AggregateFunc, BinaryOp, CastType, Expr, Literal, QueryAst, SortDirection,
    SqlType, WEEK_PATTERN,
};

#[derive(Debug)]
enum Bound {
    Column(Column),
    Const(ScalarValue),
    Negate(Box<Bound>),
    Arith(BinaryOp, Box<Bound>, Box<Bound>),
    Compare(BinaryOp, Box<Bound>, Box<Bound>),
    And(Box<Bound>, Box<Bound>),
    Or(Box<Bound>, Box<Bound>),
    IsNull(Box<Bound>, bool),
    Coalesce(Vec<Bound>),
    ToChar { inner: Box<Bound>, weekly: bool },
    Epoch(Box<Bound>, Box<Bound>),
    Json { column: Column, key: String, as_text: bool },
    Cast { inner: Box<Bound>, target: CastType },
    GroupRef(usize),
    AggRef(usize),
}

#[derive(Debug)]
struct AggSpec {
    func: AggregateFunc,
    arg: Option<Bound>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Row,
    Group,
}

struct Binder {
    schema: TableSchema,
    keys: Vec<Expr>,
    agg_exprs: Vec<Expr>,
    aggs: Vec<AggSpec>,
}

fn bind_err(e: TypeError) -> ExecutionError {
    ExecutionError::bind(e.message)
}

impl Binder {
    fn ty(&self, e: &Expr) -> Result<SqlType, ExecutionError> {
        infer(e, &self.schema, Clause::Select).map_err(bind_err)
    }

    fn bind(&mut self, e: &Expr, expected: Option<SqlType>, mode: Mode) -> Result<Bound, ExecutionError> {
        if mode == Mode::Group {
            if let Some(i) = self.keys.iter().position(|k| k == e) {
                return Ok(Bound::GroupRef(i));
            }
            match e {
                Expr::Aggregate { func, arg } => {
                    if let Some(j) = self.agg_exprs.iter().position(|a| a == e) {
                        return Ok(Bound::AggRef(j));
                    }
                    let arg = match arg {
                        AggregateArg::Star => None,
                        AggregateArg::Expr(x) => {
                            let want = match func {
                                AggregateFunc::Sum | AggregateFunc::Avg => Some(SqlType::Number),
                                _ => None,
                            };
                            Some(self.bind(x, want, Mode::Row)?)
                        }
                    };
                    self.agg_exprs.push(e.clone());
                    self.aggs.push(AggSpec { func: *func, arg });
                    return Ok(Bound::AggRef(self.aggs.len() - 1));
                }
                Expr::Column(c) | Expr::JsonAccess { column: c, .. } => {
                    return Err(ExecutionError::bind(format!(
                        "column \"{c}\" must appear in the GROUP BY clause or be used in an aggregate function"
                    )))
                }
                _ => {}
            }
        } else if e.is_aggregate() {
            return Err(ExecutionError::bind("aggregate functions are not allowed here"));
        }

        Ok(match e {
            Expr::Column(name) => Bound::Column(
                Column::from_name(name)
                    .ok_or_else(|| ExecutionError::bind(format!("column \"{name}\" does not exist")))?,
            ),
            Expr::Literal(lit) => Bound::Const(literal_value(lit, expected)?),
            Expr::Negate(x) => Bound::Negate(Box::new(self.bind(x, Some(SqlType::Number), mode)?)),
            Expr::Binary { op, left, right } => {
                if op.is_arithmetic() {
                    Bound::Arith(
                        *op,
                        Box::new(self.bind(left, Some(SqlType::Number), mode)?),
                        Box::new(self.bind(right, Some(SqlType::Number), mode)?),
                    )
                } else if op.is_comparison() {
                    let t = common_type(self.ty(left)?, self.ty(right)?)
                        .ok_or_else(|| ExecutionError::bind(format!("operator does not exist: {}", op.symbol())))?;
                    Bound::Compare(
                        *op,
                        Box::new(self.bind(left, Some(t), mode)?),
                        Box::new(self.bind(right, Some(t), mode)?),
                    )
                } else {
                    let l = Box::new(self.bind(left, Some(SqlType::Bool), mode)?);
                    let r = Box::new(self.bind(right, Some(SqlType::Bool), mode)?);
                    if *op == BinaryOp::And {
                        Bound::And(l, r)
                    } else {
                        Bound::Or(l, r)
                    }
                }
            }
            Expr::IsNull { expr, negated } => Bound::IsNull(Box::new(self.bind(expr, None, mode)?), *negated),
            Expr::Coalesce(args) => {
                let t = self.ty(e)?;
                let mut bound = Vec::with_capacity(args.len());
                for a in args {
                    bound.push(self.bind(a, Some(t), mode)?);
                }
                Bound::Coalesce(bound)
            }
            Expr::ToChar { expr, pattern } => Bound::ToChar {
                inner: Box::new(self.bind(expr, Some(SqlType::Timestamp), mode)?),
                weekly: pattern == WEEK_PATTERN,
            },
            Expr::ExtractEpoch { end, start } => Bound::Epoch(
                Box::new(self.bind(end, Some(SqlType::Timestamp), mode)?),
                Box::new(self.bind(start, Some(SqlType::Timestamp), mode)?),
            ),
            Expr::JsonAccess { column, key, as_text } => Bound::Json {
                column: Column::from_name(column)
                    .ok_or_else(|| ExecutionError::bind(format!("column \"{column}\" does not exist")))?,
                key: key.clone(),
                as_text: *as_text,
            },
            Expr::Cast { expr, target } => {
                let want = matches!(expr.as_ref(), Expr::Literal(Literal::Text(_))).then_some(SqlType::Number);
                Bound::Cast {
                    inner: Box::new(self.bind(expr, want, mode)?),
                    target: *target,
                }
            }
            Expr::Aggregate { .. } => unreachable!("handled above"),
        })
    }
}

fn literal_value(lit: &Literal, expected: Option<SqlType>) -> Result<ScalarValue, ExecutionError> {
    let s = match lit {
        Literal::Null => return Ok(ScalarValue::Null),
        Literal::Number(d) => return Ok(ScalarValue::Number(*d)),
        Literal::Text(s) => s,
    };
    let invalid = |t: SqlType| ExecutionError::bind(format!("invalid input syntax for type {}: \"{s}\"", t.name()));
    Ok(match expected {
        Some(SqlType::Number) => ScalarValue::Number(parse_number_text(s).ok_or_else(|| invalid(SqlType::Number))?),
        Some(SqlType::Timestamp) => {
            ScalarValue::Timestamp(parse_timestamp_literal(s).ok_or_else(|| invalid(SqlType::Timestamp))?)
        }
        Some(SqlType::Bool) => match s.to_ascii_lowercase().as_str() {
            "true" => ScalarValue::Bool(true),
            "false" => ScalarValue::Bool(false),
            _ => return Err(invalid(SqlType::Bool)),
        },
        Some(SqlType::Json) => ScalarValue::Json(serde_json::from_str(s).map_err(|_| invalid(SqlType::Json))?),
        _ => ScalarValue::Text(s.clone()),
    })
}

fn cell_value(record: &JobRecord, column: Column) -> ScalarValue {
    match record.cell(column) {
        CellRef::Null => ScalarValue::Null,
        CellRef::Text(s) => ScalarValue::Text(s.to_string()),
        CellRef::Timestamp(ts) => ScalarValue::Timestamp(*ts),
        CellRef::Json(v) => ScalarValue::Json(v.clone()),
    }
}

/// The value under a top-level key, or `None` when the key (or the object)
/// is absent.
fn json_field<'r>(record: &'r JobRecord, column: Column, key: &str) -> Option<Option<&'r JsonValue>> {
    match record.cell(column) {
        CellRef::Json(v) => Some(v.as_object().and_then(|o| o.get(key))),
        _ => None,
    }
}

fn json_to_scalar(v: &JsonValue, as_text: bool) -> ScalarValue {
    match (v, as_text) {
        (_, false) => ScalarValue::Json(v.clone()),
        (JsonValue::Null, true) => ScalarValue::Null,
        (JsonValue::String(s), true) => ScalarValue::Text(s.clone()),
        (other, true) => ScalarValue::Text(other.to_string()),
    }
}

fn overflow() -> ExecutionError {
    ExecutionError::eval("numeric field overflow")
}

fn cast_type_name(target: CastType) -> &'static str {
    match target {
        CastType::Float => "double precision",
        CastType::Numeric => "numeric",
    }
}

fn cast_number(v: ScalarValue, target: CastType) -> Result<ScalarValue, ExecutionError> {
    let tname = cast_type_name(target);
    match v {
        ScalarValue::Null | ScalarValue::Number(_) => Ok(v),
        ScalarValue::Text(s) => parse_number_text(&s)
            .map(ScalarValue::Number)
            .ok_or_else(|| ExecutionError::eval(format!("invalid input syntax for type {tname}: \"{s}\""))),
        ScalarValue::Json(JsonValue::Number(n)) => parse_number_text(&n.to_string())
            .map(ScalarValue::Number)
            .ok_or_else(overflow),
        ScalarValue::Json(j) => {
            let kind = match j {
                JsonValue::Null => "null",
                JsonValue::Bool(_) => "boolean",
                JsonValue::String(_) => "string",
                JsonValue::Array(_) => "array",
                _ => "object",
            };
            Err(ExecutionError::eval(format!(
                "cannot cast jsonb {kind} to type {tname}"
            )))
        }
        other => Err(ExecutionError::eval(format!("cannot cast {other} to type {tname}"))),
    }
}

fn week_label(ts: &chrono::DateTime<Utc>) -> String {
    format!("{:04}-W{:02}", ts.year(), ts.ordinal0() / 7 + 1)
}

struct Env<'a> {
    row: Option<&'a JobRecord>,
    keys: &'a [ScalarValue],
    aggs: &'a [ScalarValue],
}

fn eval(b: &Bound, env: &Env<'_>) -> Result<ScalarValue, ExecutionError> {
    use ScalarValue as V;
    Ok(match b {
        Bound::Column(c) => cell_value(env.row.expect("row context"), *c),
        Bound::Const(v) => v.clone(),
        Bound::GroupRef(i) => env.keys[*i].clone(),
        Bound::AggRef(j) => env.aggs[*j].clone(),
        Bound::Negate(x) => match eval(x, env)? {
            V::Number(d) => V::Number(-d),
            _ => V::Null,
        },
        Bound::Arith(op, l, r) => {
            let (V::Number(a), V::Number(b)) = (eval(l, env)?, eval(r, env)?) else {
                return Ok(V::Null);
            };
            let out = match op {
                BinaryOp::Add => a.checked_add(b),
                BinaryOp::Sub => a.checked_sub(b),
                BinaryOp::Mul => a.checked_mul(b),
                _ => {
                    if b.is_zero() {
                        return Err(ExecutionError::eval("division by zero"));
                    }
                    a.checked_div(b)
                }
            };
            V::Number(out.ok_or_else(overflow)?)
        }
        Bound::Compare(op, l, r) => {
            let (a, b) = (eval(l, env)?, eval(r, env)?);
            if a.is_null() || b.is_null() {
                return Ok(V::Null);
            }
            let ord = a.total_cmp(&b);
            V::Bool(match op {
                BinaryOp::Eq => ord == Ordering::Equal,
                BinaryOp::NotEq => ord != Ordering::Equal,
                BinaryOp::Lt => ord == Ordering::Less,
                BinaryOp::LtEq => ord != Ordering::Greater,
                BinaryOp::Gt => ord == Ordering::Greater,
                _ => ord != Ordering::Less,
            })
        }
        Bound::And(l, r) => match (eval(l, env)?, eval(r, env)?) {
            (V::Bool(false), _) | (_, V::Bool(false)) => V::Bool(false),
            (V::Bool(true), V::Bool(true)) => V::Bool(true),
            _ => V::Null,
        },
        Bound::Or(l, r) => match (eval(l, env)?, eval(r, env)?) {
            (V::Bool(true), _) | (_, V::Bool(true)) => V::Bool(true),
            (V::Bool(false), V::Bool(false)) => V::Bool(false),
            _ => V::Null,
        },
        Bound::IsNull(x, negated) => V::Bool(eval(x, env)?.is_null() != *negated),
        Bound::Coalesce(args) => {
            for a in args {
                let v = eval(a, env)?;
                if !v.is_null() {
                    return Ok(v);
                }
            }
            V::Null
        }
        Bound::ToChar { inner, weekly } => match eval(inner, env)? {
            V::Timestamp(ts) => {
                let utc = ts.with_timezone(&Utc);
                V::Text(if *weekly {
                    week_label(&utc)
                } else {
                    utc.format("%Y-%m-%d").to_string()
                })
            }
            _ => V::Null,
        },
        Bound::Epoch(end, start) => match (eval(end, env)?, eval(start, env)?) {
            (V::Timestamp(a), V::Timestamp(b)) => {
                let micros = (a - b).num_microseconds().ok_or_else(overflow)?;
                V::Number(Decimal::new(micros, 6))
            }
            _ => V::Null,
        },
        Bound::Json { column, key, as_text } => match json_field(env.row.expect("row context"), *column, key) {
            Some(Some(v)) => json_to_scalar(v, *as_text),
            _ => V::Null,
        },
        Bound::Cast { inner, target } => {
            if let (Bound::Json { column, key, as_text }, Some(row)) = (inner.as_ref(), env.row) {
                return match json_field(row, *column, key) {
                    None => Ok(V::Null),
                    Some(Some(v)) => cast_number(json_to_scalar(v, *as_text), *target),
                    Some(None) => Err(ExecutionError::eval(format!(
                        "JSONB key '{key}' is missing in {}; casting a missing key to {} fails, wrap it as COALESCE({}->>'{key}', '0')::FLOAT",
                        column.name(),
                        cast_type_name(*target),
                        column.name()
                    ))),
                };
            }
            cast_number(eval(inner, env)?, *target)?
        }
    })
}

enum Acc {
    CountStar(i64),
    Count(i64),
    Sum(Option<Decimal>),
    Avg(Decimal, i64),
    Min(ScalarValue),
    Max(ScalarValue),
}

impl Acc {
    fn new(spec: &AggSpec) -> Acc {
        match (spec.func, &spec.arg) {
            (AggregateFunc::Count, None) => Acc::CountStar(0),
            (AggregateFunc::Count, Some(_)) => Acc::Count(0),
            (AggregateFunc::Sum, _) => Acc::Sum(None),
            (AggregateFunc::Avg, _) => Acc::Avg(Decimal::ZERO, 0),
            (AggregateFunc::Min, _) => Acc::Min(ScalarValue::Null),
            (AggregateFunc::Max, _) => Acc::Max(ScalarValue::Null),
        }
    }

    fn update(&mut self, v: Option<ScalarValue>) -> Result<(), ExecutionError> {
        if let Acc::CountStar(n) = self {
            *n += 1;
            return Ok(());
        }
        let v = v.unwrap_or(ScalarValue::Null);
        if v.is_null() {
            return Ok(());
        }
        match self {
            Acc::CountStar(_) => unreachable!(),
            Acc::Count(n) => *n += 1,
            Acc::Sum(total) => {
                if let ScalarValue::Number(d) = v {
                    *total = Some(match total {
                        Some(t) => t.checked_add(d).ok_or_else(overflow)?,
                        None => d,
                    });
                }
            }
            Acc::Avg(sum, n) => {
                if let ScalarValue::Number(d) = v {
                    *sum = sum.checked_add(d).ok_or_else(overflow)?;
                    *n += 1;
                }
            }
            Acc::Min(best) => {
                if best.is_null() || v.total_cmp(best) == Ordering::Less {
                    *best = v;
                }
            }
            Acc::Max(best) => {
                if best.is_null() || v.total_cmp(best) == Ordering::Greater {
                    *best = v;
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<ScalarValue, ExecutionError> {
        Ok(match self {
            Acc::CountStar(n) | Acc::Count(n) => ScalarValue::Number(Decimal::from(n)),
            Acc::Sum(t) => t.map_or(ScalarValue::Null, ScalarValue::Number),
            Acc::Avg(_, 0) => ScalarValue::Null,
            Acc::Avg(sum, n) => ScalarValue::Number(sum.checked_div(Decimal::from(n)).ok_or_else(overflow)?),
            Acc::Min(v) | Acc::Max(v) => v,
        })
    }
}

/// Ascending puts nulls last, descending puts them first.
fn compare_keys(a: &[ScalarValue], b: &[ScalarValue], dirs: &[SortDirection]) -> Ordering {
    for ((x, y), dir) in a.iter().zip(b).zip(dirs) {
        let ord = match (x.is_null(), y.is_null()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            _ => x.total_cmp(y),
        };
        let ord = if *dir == SortDirection::Desc {
            ord.reverse()
        } else {
            ord
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

/// Evaluates `q` over `rows`. Rows are never modified.
pub fn evaluate(q: &QueryAst, rows: &[JobRecord]) -> Result<ResultSet, ExecutionError> {
    let schema = TableSchema::jobs();
    if q.from_table != schema.table_name {
        return Err(ExecutionError::bind(format!(
            "relation \"{}\" does not exist",
            q.from_table
        )));
    }

    let mut columns = Vec::with_capacity(q.select_items.len());
    for item in &q.select_items {
        let kind = match infer(&item.expr, &schema, Clause::Select).map_err(bind_err)? {
            SqlType::Null | SqlType::Unknown => SqlType::Text,
            t => t,
        };
        columns.push(ResultColumn {
            name: item.output_name(),
            kind,
        });
    }
    if let Some(w) = &q.where_clause {
        match infer(w, &schema, Clause::Where).map_err(bind_err)? {
            SqlType::Bool | SqlType::Null => {}
            t => {
                return Err(ExecutionError::bind(format!(
                    "argument of WHERE must be type boolean, not type {}",
                    t.name()
                )))
            }
        }
    }
    let keys = resolve_group_keys(q, &schema).map_err(bind_err)?;
    for k in &keys {
        infer(k, &schema, Clause::GroupBy).map_err(bind_err)?;
    }
    let order = resolve_order(q).map_err(bind_err)?;
    for (t, _) in &order {
        if let OrderTarget::Input(e) = t {
            infer(e, &schema, Clause::OrderBy).map_err(bind_err)?;
        }
    }

    let grouped = is_grouped(q);
    let mode = if grouped { Mode::Group } else { Mode::Row };
    let mut binder = Binder {
        schema,
        keys: keys.clone(),
        agg_exprs: Vec::new(),
        aggs: Vec::new(),
    };
    let where_bound = q
        .where_clause
        .as_ref()
        .map(|w| binder.bind(w, Some(SqlType::Bool), Mode::Row))
        .transpose()?;
    let key_bound = keys
        .iter()
        .map(|k| binder.bind(k, None, Mode::Row))
        .collect::<Result<Vec<_>, _>>()?;
    let select_bound = q
        .select_items
        .iter()
        .map(|s| binder.bind(&s.expr, None, mode))
        .collect::<Result<Vec<_>, _>>()?;
    enum SortKey {
        Output(usize),
        Expr(Bound),
    }
    let mut sort_keys = Vec::with_capacity(order.len());
    let mut dirs = Vec::with_capacity(order.len());
    for (t, dir) in &order {
        sort_keys.push(match t {
            OrderTarget::Output(i) => SortKey::Output(*i),
            OrderTarget::Input(e) => SortKey::Expr(binder.bind(e, None, mode)?),
        });
        dirs.push(*dir);
    }

    let filtered = rows.iter().filter_map(|r| match &where_bound {
        None => Some(Ok(r)),
        Some(w) => {
            let env = Env {
                row: Some(r),
                keys: &[],
                aggs: &[],
            };
            match eval(w, &env) {
                Ok(ScalarValue::Bool(true)) => Some(Ok(r)),
                Ok(_) => None,
                Err(e) => Some(Err(e)),
            }
        }
    });

    let mut produced: Vec<(Vec<ScalarValue>, Vec<ScalarValue>)> = Vec::new();
    let finish_row =
        |env: &Env<'_>, out: &mut Vec<(Vec<ScalarValue>, Vec<ScalarValue>)>| -> Result<(), ExecutionError> {
            let values = select_bound
                .iter()
                .map(|b| eval(b, env))
                .collect::<Result<Vec<_>, _>>()?;
            let mut sort_values = Vec::with_capacity(sort_keys.len());
            for k in &sort_keys {
                sort_values.push(match k {
                    SortKey::Output(i) => values[*i].clone(),
                    SortKey::Expr(b) => eval(b, env)?,
                });
            }
            out.push((values, sort_values));
            Ok(())
        };

    if grouped {
        let mut groups: IndexMap<Vec<GroupKey>, (Vec<ScalarValue>, Vec<Acc>)> = IndexMap::new();
        if keys.is_empty() {
            groups.insert(Vec::new(), (Vec::new(), binder.aggs.iter().map(Acc::new).collect()));
        }
        for r in filtered {
            let r = r?;
            let env = Env {
                row: Some(r),
                keys: &[],
                aggs: &[],
            };
            let key_values = key_bound.iter().map(|k| eval(k, &env)).collect::<Result<Vec<_>, _>>()?;
            let id: Vec<GroupKey> = key_values.iter().map(GroupKey::from).collect();
            let entry = groups
                .entry(id)
                .or_insert_with(|| (key_values, binder.aggs.iter().map(Acc::new).collect()));
            for (acc, spec) in entry.1.iter_mut().zip(&binder.aggs) {
                let v = spec.arg.as_ref().map(|a| eval(a, &env)).transpose()?;
                acc.update(v)?;
            }
        }
        for (_, (key_values, accs)) in groups {
            let aggs = accs.into_iter().map(Acc::finish).collect::<Result<Vec<_>, _>>()?;
            let env = Env {
                row: None,
                keys: &key_values,
                aggs: &aggs,
            };
            finish_row(&env, &mut produced)?;
        }
    } else {
        for r in filtered {
            let env = Env {
                row: Some(r?),
                keys: &[],
                aggs: &[],
            };
            finish_row(&env, &mut produced)?;
        }
    }

    if !dirs.is_empty() {
        produced.sort_by(|a, b| compare_keys(&a.1, &b.1, &dirs));
    }
    let mut out_rows: Vec<Vec<ScalarValue>> = produced.into_iter().map(|(v, _)| v).collect();
    if let Some(n) = q.limit {
        out_rows.truncate(usize::try_from(n).unwrap_or(usize::MAX));
    }
    Ok(ResultSet {
        columns,
        rows: out_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datastore::{generate_synthetic, GenerationProfile};
    use crate::sql::parse;
    use serde_json::json;
    use std::str::FromStr;

    fn record(id: &str, state: &str, created: &str, started: Option<&str>, outputs: Option<JsonValue>) -> JobRecord {
        let mut obj = json!({
            "id": id,
            "name": format!("job {id}"),
            "lab_id": "lab-1",
            "workflow_id": if id < "c" { "wf-a" } else { "wf-b" },
            "state": state,
            "created_timestamp": created,
        });
        if let Some(s) = started {
            obj["started_timestamp"] = json!(s);
        }
        if let Some(o) = outputs {
            obj["outputs"] = o;
        }
        JobRecord::from_json_object(obj.as_object().unwrap(), 0).unwrap()
    }

    fn fixture() -> Vec<JobRecord> {
        vec![
            record(
                "a",
                "COMPLETED",
                "2024-01-01T00:00:00Z",
                Some("2024-01-01T01:00:00Z"),
                Some(json!({"n": "2"})),
            ),
            record(
                "b",
                "COMPLETED",
                "2024-01-01T00:00:00Z",
                Some("2024-01-01T00:30:00Z"),
                Some(json!({"n": "x"})),
            ),
            record(
                "c",
                "IN_ERROR",
                "2024-01-15T13:45:00Z",
                Some("2024-01-15T13:45:10Z"),
                Some(json!({})),
            ),
            record("d", "IN_ERROR", "2024-01-16T00:00:00Z", None, None),
            record("e", "COMPLETED", "2024-01-16T00:00:00Z", None, Some(json!({"n": 4}))),
        ]
    }

    fn run(sql: &str) -> Result<ResultSet, ExecutionError> {
        evaluate(&parse(sql).unwrap(), &fixture())
    }

    fn num(s: &str) -> ScalarValue {
        ScalarValue::Number(Decimal::from_str(s).unwrap())
    }

    #[test]
    fn epoch_of_one_hour() {
        let r =
            run("SELECT id, EXTRACT(EPOCH FROM ('2024-01-01T01:00:00Z' - '2024-01-01T00:00:00Z')) FROM jobs LIMIT 1")
                .unwrap();
        assert_eq!(r.rows[0][1], num("3600"));
    }

    #[test]
    fn to_char_day_and_week() {
        let r = run("SELECT TO_CHAR(created_timestamp, 'YYYY-MM-DD'), TO_CHAR(created_timestamp, 'YYYY-\"W\"WW') FROM jobs WHERE id = 'c'").unwrap();
        assert_eq!(r.rows[0][0], ScalarValue::Text("2024-01-15".into()));
        assert_eq!(r.rows[0][1], ScalarValue::Text("2024-W03".into()));
    }

    #[test]
    fn group_by_state_two_groups_in_first_appearance_order() {
        let r = run("SELECT state, COUNT(*) FROM jobs GROUP BY state").unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0], vec![ScalarValue::Text("COMPLETED".into()), num("3")]);
        assert_eq!(r.rows[1], vec![ScalarValue::Text("IN_ERROR".into()), num("2")]);
        assert_eq!(r.columns[1].name, "count");
    }

    #[test]
    fn avg_skips_nulls() {
        let r = run("SELECT state, AVG(EXTRACT(EPOCH FROM (started_timestamp - created_timestamp))) AS s FROM jobs GROUP BY state ORDER BY s DESC").unwrap();
        assert_eq!(r.rows[0], vec![ScalarValue::Text("COMPLETED".into()), num("2700")]);
        assert_eq!(r.rows[1], vec![ScalarValue::Text("IN_ERROR".into()), num("10")]);
    }

    #[test]
    fn cast_failures() {
        let e = run("SELECT id, (outputs->>'n')::FLOAT FROM jobs").unwrap_err();
        assert_eq!(e.message, "invalid input syntax for type double precision: \"x\"");
        assert_eq!(e.phase, super::super::Phase::Evaluate);
        let e = run("SELECT id, (outputs->>'n')::FLOAT FROM jobs WHERE id = 'c'").unwrap_err();
        assert!(e.message.contains("COALESCE"), "{}", e.message);
        // null column, or COALESCE around the access, are fine
        let r = run("SELECT id, (outputs->>'n')::FLOAT FROM jobs WHERE id = 'd'").unwrap();
        assert_eq!(r.rows[0][1], ScalarValue::Null);
        let r = run("SELECT workflow_id, SUM(COALESCE(outputs->>'n', '0')::FLOAT) FROM jobs WHERE id <> 'b' GROUP BY workflow_id").unwrap();
        assert_eq!(
            r.rows,
            vec![
                vec![ScalarValue::Text("wf-a".into()), num("2")],
                vec![ScalarValue::Text("wf-b".into()), num("4")],
            ]
        );
    }

    #[test]
    fn global_aggregate_over_empty_input() {
        let r = run("SELECT COUNT(*), SUM(1) FROM jobs WHERE id = 'zzz'").unwrap();
        assert_eq!(r.rows, vec![vec![num("0"), ScalarValue::Null]]);
        let r = run("SELECT state, COUNT(*) FROM jobs WHERE id = 'zzz' GROUP BY state").unwrap();
        assert!(r.rows.is_empty());
    }

    #[test]
    fn order_nulls_and_stability() {
        let r = run("SELECT id, started_timestamp IS NULL AS n FROM jobs ORDER BY TO_CHAR(started_timestamp, 'YYYY-MM-DD') DESC").unwrap();
        let ids: Vec<String> = r.rows.iter().map(|row| row[0].to_string()).collect();
        assert_eq!(ids, vec!["d", "e", "c", "a", "b"]);
        let r = run("SELECT id, state FROM jobs ORDER BY state LIMIT 3").unwrap();
        let ids: Vec<String> = r.rows.iter().map(|row| row[0].to_string()).collect();
        assert_eq!(ids, vec!["a", "b", "e"]);
    }

    #[test]
    fn division_by_zero() {
        let e = run("SELECT id, 1 / 0 FROM jobs").unwrap_err();
        assert_eq!(e.message, "division by zero");
    }

    #[test]
    fn bind_errors() {
        assert_eq!(
            run("SELECT status, id FROM jobs").unwrap_err().phase,
            super::super::Phase::Bind
        );
        assert!(run("SELECT state, id, COUNT(*) FROM jobs GROUP BY state")
            .unwrap_err()
            .message
            .contains("must appear in the GROUP BY"));
    }

    #[test]
    fn creation_to_start_means_on_corpus() {
        let rows = generate_synthetic(1, &GenerationProfile::default()).unwrap();
        let q = parse("SELECT state, AVG(EXTRACT(EPOCH FROM (started_timestamp - created_timestamp))) AS avg_creation_to_start_time FROM jobs WHERE started_timestamp IS NOT NULL GROUP BY state").unwrap();
        let r = evaluate(&q, &rows).unwrap();
        let get = |s: &str| {
            r.rows.iter().find(|row| row[0].as_text() == Some(s)).unwrap()[1]
                .as_f64()
                .unwrap()
        };
        assert!((get("COMPLETED") - 8693.34).abs() < 0.01);
        assert!((get("PAUSED") - 33.13).abs() < 0.01);
    }
}
