//! A deliberately naive evaluator: dynamic values, `f64` numbers, groups
//! found by linear search and aggregates recomputed by rescanning members.
//! It shares no code with the engine beyond the AST and record types.

use std::cmp::Ordering;

use chrono::{DateTime, Datelike, NaiveDate, Utc};
use ctra_core::datastore::{CellRef, Column, JobRecord, JsonValue};
use ctra_core::sql::{AggregateArg, AggregateFunc, BinaryOp, Expr, Literal, QueryAst, SortDirection};
use rust_decimal::prelude::ToPrimitive;

#[derive(Debug, Clone, PartialEq)]
pub enum OVal {
    Null,
    Bool(bool),
    Num(f64),
    Text(String),
    /// Microseconds since the Unix epoch.
    Ts(i64),
    Json(JsonValue),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<OVal>>,
}

pub const MAX_ROWS: usize = 1000;

enum Ctx<'a> {
    Row(&'a JobRecord),
    Group {
        members: &'a [&'a JobRecord],
        keys: &'a [Expr],
    },
}

fn parse_num(s: &str) -> Option<f64> {
    let t = s.trim();
    let ok_chars = t
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'));
    if t.is_empty() || !ok_chars {
        return None;
    }
    t.parse::<f64>().ok()
}

fn parse_ts(s: &str) -> Option<i64> {
    let t = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(t) {
        return Some(dt.timestamp_micros());
    }
    NaiveDate::parse_from_str(t, "%Y-%m-%d")
        .ok()
        .map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp_micros())
}

fn column_of(name: &str) -> Result<Column, String> {
    Column::from_name(name).ok_or_else(|| format!("column \"{name}\" does not exist"))
}

fn cell(rec: &JobRecord, name: &str) -> Result<OVal, String> {
    Ok(match rec.cell(column_of(name)?) {
        CellRef::Null => OVal::Null,
        CellRef::Text(s) => OVal::Text(s.to_string()),
        CellRef::Timestamp(t) => OVal::Ts(t.timestamp_micros()),
        CellRef::Json(v) => OVal::Json(v.clone()),
    })
}

fn cmp_vals(a: &OVal, b: &OVal) -> Option<Ordering> {
    match (a, b) {
        (OVal::Num(x), OVal::Num(y)) => x.partial_cmp(y),
        (OVal::Num(x), OVal::Text(s)) => parse_num(s).and_then(|y| x.partial_cmp(&y)),
        (OVal::Text(s), OVal::Num(y)) => parse_num(s).and_then(|x| x.partial_cmp(y)),
        (OVal::Ts(x), OVal::Ts(y)) => Some(x.cmp(y)),
        (OVal::Ts(x), OVal::Text(s)) => parse_ts(s).map(|y| x.cmp(&y)),
        (OVal::Text(s), OVal::Ts(y)) => parse_ts(s).map(|x| x.cmp(y)),
        (OVal::Text(x), OVal::Text(y)) => Some(x.as_bytes().cmp(y.as_bytes())),
        (OVal::Bool(x), OVal::Bool(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

fn as_num(v: OVal) -> Result<Option<f64>, String> {
    match v {
        OVal::Null => Ok(None),
        OVal::Num(x) => Ok(Some(x)),
        OVal::Text(s) => parse_num(&s).map(Some).ok_or_else(|| format!("not a number: {s}")),
        other => Err(format!("not a number: {other:?}")),
    }
}

fn as_ts(v: OVal) -> Result<Option<i64>, String> {
    match v {
        OVal::Null => Ok(None),
        OVal::Ts(t) => Ok(Some(t)),
        OVal::Text(s) => parse_ts(&s).map(Some).ok_or_else(|| format!("not a timestamp: {s}")),
        other => Err(format!("not a timestamp: {other:?}")),
    }
}

fn json_get<'r>(rec: &'r JobRecord, column: &str, key: &str) -> Result<Option<Option<&'r JsonValue>>, String> {
    Ok(match rec.cell(column_of(column)?) {
        CellRef::Json(v) => Some(match v {
            JsonValue::Object(m) => m.get(key),
            _ => None,
        }),
        _ => None,
    })
}

fn json_scalar(v: &JsonValue, as_text: bool) -> OVal {
    if !as_text {
        return OVal::Json(v.clone());
    }
    match v {
        JsonValue::Null => OVal::Null,
        JsonValue::String(s) => OVal::Text(s.clone()),
        other => OVal::Text(other.to_string()),
    }
}

fn cast_num(v: OVal) -> Result<OVal, String> {
    match v {
        OVal::Null => Ok(OVal::Null),
        OVal::Num(x) => Ok(OVal::Num(x)),
        OVal::Text(s) => parse_num(&s)
            .map(OVal::Num)
            .ok_or_else(|| format!("invalid input syntax: {s}")),
        OVal::Json(JsonValue::Number(n)) => n.as_f64().map(OVal::Num).ok_or_else(|| "bad json number".to_string()),
        other => Err(format!("cannot cast {other:?}")),
    }
}

fn eval(e: &Expr, ctx: &Ctx<'_>) -> Result<OVal, String> {
    if let Ctx::Group { members, keys } = ctx {
        if keys.contains(e) {
            return match members.first() {
                Some(first) => eval(e, &Ctx::Row(first)),
                None => Err("group without rows".into()),
            };
        }
        match e {
            Expr::Aggregate { func, arg } => return aggregate(*func, arg, members),
            Expr::Column(c) | Expr::JsonAccess { column: c, .. } => {
                return Err(format!("column \"{c}\" is not grouped"))
            }
            _ => {}
        }
    }
    match e {
        Expr::Column(name) => match ctx {
            Ctx::Row(rec) => cell(rec, name),
            Ctx::Group { .. } => unreachable!(),
        },
        Expr::Literal(Literal::Null) => Ok(OVal::Null),
        Expr::Literal(Literal::Text(s)) => Ok(OVal::Text(s.clone())),
        Expr::Literal(Literal::Number(d)) => Ok(OVal::Num(d.to_f64().unwrap())),
        Expr::Negate(x) => Ok(match as_num(eval(x, ctx)?)? {
            Some(v) => OVal::Num(-v),
            None => OVal::Null,
        }),
        Expr::Binary { op, left, right } => {
            let l = eval(left, ctx)?;
            let r = eval(right, ctx)?;
            match op {
                BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => {
                    let (Some(a), Some(b)) = (as_num(l)?, as_num(r)?) else {
                        return Ok(OVal::Null);
                    };
                    Ok(OVal::Num(match op {
                        BinaryOp::Add => a + b,
                        BinaryOp::Sub => a - b,
                        BinaryOp::Mul => a * b,
                        _ => {
                            if b == 0.0 {
                                return Err("division by zero".into());
                            }
                            a / b
                        }
                    }))
                }
                BinaryOp::And | BinaryOp::Or => {
                    let is_and = *op == BinaryOp::And;
                    let truth = |v: &OVal| match v {
                        OVal::Bool(b) => Some(*b),
                        _ => None,
                    };
                    let (a, b) = (truth(&l), truth(&r));
                    Ok(if is_and {
                        if a == Some(false) || b == Some(false) {
                            OVal::Bool(false)
                        } else if a.is_none() || b.is_none() {
                            OVal::Null
                        } else {
                            OVal::Bool(true)
                        }
                    } else if a == Some(true) || b == Some(true) {
                        OVal::Bool(true)
                    } else if a.is_none() || b.is_none() {
                        OVal::Null
                    } else {
                        OVal::Bool(false)
                    })
                }
                _ => {
                    if l == OVal::Null || r == OVal::Null {
                        return Ok(OVal::Null);
                    }
                    let ord = cmp_vals(&l, &r).ok_or_else(|| format!("cannot compare {l:?} and {r:?}"))?;
                    Ok(OVal::Bool(match op {
                        BinaryOp::Eq => ord.is_eq(),
                        BinaryOp::NotEq => ord.is_ne(),
                        BinaryOp::Lt => ord.is_lt(),
                        BinaryOp::LtEq => ord.is_le(),
                        BinaryOp::Gt => ord.is_gt(),
                        _ => ord.is_ge(),
                    }))
                }
            }
        }
        Expr::IsNull { expr, negated } => {
            let null = eval(expr, ctx)? == OVal::Null;
            Ok(OVal::Bool(null != *negated))
        }
        Expr::Coalesce(args) => {
            for a in args {
                let v = eval(a, ctx)?;
                if v != OVal::Null {
                    return Ok(v);
                }
            }
            Ok(OVal::Null)
        }
        Expr::ToChar { expr, pattern } => match as_ts(eval(expr, ctx)?)? {
            None => Ok(OVal::Null),
            Some(us) => {
                let dt = DateTime::<Utc>::from_timestamp_micros(us).unwrap();
                if pattern.contains("\"W\"") {
                    let week = dt.ordinal0() / 7 + 1;
                    Ok(OVal::Text(format!("{:04}-W{:02}", dt.year(), week)))
                } else {
                    Ok(OVal::Text(format!(
                        "{:04}-{:02}-{:02}",
                        dt.year(),
                        dt.month(),
                        dt.day()
                    )))
                }
            }
        },
        Expr::ExtractEpoch { end, start } => {
            let a = as_ts(eval(end, ctx)?)?;
            let b = as_ts(eval(start, ctx)?)?;
            Ok(match (a, b) {
                (Some(a), Some(b)) => OVal::Num((a - b) as f64 / 1e6),
                _ => OVal::Null,
            })
        }
        Expr::JsonAccess { column, key, as_text } => match ctx {
            Ctx::Row(rec) => Ok(match json_get(rec, column, key)? {
                Some(Some(v)) => json_scalar(v, *as_text),
                _ => OVal::Null,
            }),
            Ctx::Group { .. } => unreachable!(),
        },
        Expr::Cast { expr, .. } => {
            if let (Expr::JsonAccess { column, key, as_text }, Ctx::Row(rec)) = (expr.as_ref(), ctx) {
                return match json_get(rec, column, key)? {
                    None => Ok(OVal::Null),
                    Some(None) => Err(format!("missing key {key}")),
                    Some(Some(v)) => cast_num(json_scalar(v, *as_text)),
                };
            }
            cast_num(eval(expr, ctx)?)
        }
        Expr::Aggregate { .. } => Err("aggregate outside a grouped query".into()),
    }
}

fn aggregate(func: AggregateFunc, arg: &AggregateArg, members: &[&JobRecord]) -> Result<OVal, String> {
    let inner = match arg {
        AggregateArg::Star => return Ok(OVal::Num(members.len() as f64)),
        AggregateArg::Expr(e) => e,
    };
    let mut values = Vec::new();
    for m in members {
        let v = eval(inner, &Ctx::Row(m))?;
        if v != OVal::Null {
            values.push(v);
        }
    }
    match func {
        AggregateFunc::Count => Ok(OVal::Num(values.len() as f64)),
        AggregateFunc::Sum | AggregateFunc::Avg => {
            if values.is_empty() {
                return Ok(OVal::Null);
            }
            let mut total = 0.0;
            for v in &values {
                total += as_num(v.clone())?.unwrap();
            }
            if func == AggregateFunc::Sum {
                Ok(OVal::Num(total))
            } else {
                Ok(OVal::Num(total / values.len() as f64))
            }
        }
        AggregateFunc::Min | AggregateFunc::Max => {
            let mut best: Option<OVal> = None;
            for v in values {
                best = Some(match best {
                    None => v,
                    Some(b) => {
                        let ord = cmp_vals(&v, &b).ok_or("incomparable")?;
                        let better = if func == AggregateFunc::Min {
                            ord.is_lt()
                        } else {
                            ord.is_gt()
                        };
                        if better {
                            v
                        } else {
                            b
                        }
                    }
                });
            }
            Ok(best.unwrap_or(OVal::Null))
        }
    }
}

fn contains_aggregate(e: &Expr) -> bool {
    matches!(e, Expr::Aggregate { .. }) || e.children().into_iter().any(contains_aggregate)
}

/// `Some(Ok(n))` for a positive integer literal, `Some(Err)` for any other
/// literal, `None` for non-literals.
fn int_literal(e: &Expr) -> Option<Result<usize, String>> {
    match e {
        Expr::Literal(Literal::Number(d)) if d.fract().is_zero() && d.to_i64().is_some_and(|n| n >= 1) => {
            Some(Ok(d.to_usize().unwrap()))
        }
        Expr::Literal(_) => Some(Err("non-integer constant".to_string())),
        _ => None,
    }
}

/// Sort comparison: nulls last ascending, first descending.
fn order_cmp(a: &[OVal], b: &[OVal], dirs: &[SortDirection]) -> Ordering {
    for i in 0..dirs.len() {
        let ord = match (&a[i], &b[i]) {
            (OVal::Null, OVal::Null) => Ordering::Equal,
            (OVal::Null, _) => Ordering::Greater,
            (_, OVal::Null) => Ordering::Less,
            (x, y) => match (x, y) {
                (OVal::Json(p), OVal::Json(q)) => p.to_string().cmp(&q.to_string()),
                // f64 accumulation noise must not break ties the exact engine sees
                (OVal::Num(p), OVal::Num(q)) if crate::compare::close(*p, *q) => Ordering::Equal,
                _ => cmp_vals(x, y).unwrap_or(Ordering::Equal),
            },
        };
        let ord = if dirs[i] == SortDirection::Desc {
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

fn same_group_value(a: &OVal, b: &OVal) -> bool {
    match (a, b) {
        (OVal::Null, OVal::Null) => true,
        (OVal::Json(p), OVal::Json(q)) => p == q,
        (OVal::Num(x), OVal::Num(y)) => x == y,
        (OVal::Text(x), OVal::Text(y)) => x == y,
        (OVal::Ts(x), OVal::Ts(y)) => x == y,
        (OVal::Bool(x), OVal::Bool(y)) => x == y,
        _ => false,
    }
}

pub fn oracle_evaluate(q: &QueryAst, rows: &[JobRecord]) -> Result<OracleResult, String> {
    assert!(rows.len() <= MAX_ROWS, "oracle is for small inputs only");
    if q.from_table != "jobs" {
        return Err(format!("relation \"{}\" does not exist", q.from_table));
    }
    let columns: Vec<String> = q.select_items.iter().map(|s| s.output_name()).collect();

    // GROUP BY: ordinal, input column, then output name.
    let mut keys = Vec::new();
    for g in &q.group_by {
        let key = if let Some(n) = int_literal(g) {
            let n = n?;
            q.select_items
                .get(n.wrapping_sub(1))
                .ok_or("GROUP BY position out of range")?
                .expr
                .clone()
        } else if let Expr::Column(name) = g {
            if Column::from_name(name).is_some() {
                g.clone()
            } else {
                match q.select_items.iter().find(|s| s.output_name() == *name) {
                    Some(s) => s.expr.clone(),
                    None => g.clone(),
                }
            }
        } else {
            g.clone()
        };
        keys.push(key);
    }

    // ORDER BY: ordinal, output name, then expression.
    enum Key {
        Out(usize),
        Expr(Expr),
    }
    let mut order = Vec::new();
    let mut dirs = Vec::new();
    for o in &q.order_by {
        let k = if let Some(n) = int_literal(&o.expr) {
            let n = n?;
            if n == 0 || n > q.select_items.len() {
                return Err("ORDER BY position out of range".into());
            }
            Key::Out(n - 1)
        } else if let Expr::Column(name) = &o.expr {
            match columns.iter().position(|c| c == name) {
                Some(i) => Key::Out(i),
                None => Key::Expr(o.expr.clone()),
            }
        } else {
            Key::Expr(o.expr.clone())
        };
        order.push(k);
        dirs.push(o.direction);
    }

    let mut kept: Vec<&JobRecord> = Vec::new();
    for r in rows {
        let pass = match &q.where_clause {
            None => true,
            Some(w) => eval(w, &Ctx::Row(r))? == OVal::Bool(true),
        };
        if pass {
            kept.push(r);
        }
    }

    let grouped = !q.group_by.is_empty()
        || q.select_items.iter().any(|s| contains_aggregate(&s.expr))
        || q.order_by.iter().any(|o| contains_aggregate(&o.expr));

    let mut produced: Vec<(Vec<OVal>, Vec<OVal>)> = Vec::new();
    let emit = |ctx: &Ctx<'_>, produced: &mut Vec<(Vec<OVal>, Vec<OVal>)>| -> Result<(), String> {
        let mut values = Vec::new();
        for s in &q.select_items {
            values.push(eval(&s.expr, ctx)?);
        }
        let mut sort_values = Vec::new();
        for k in &order {
            sort_values.push(match k {
                Key::Out(i) => values[*i].clone(),
                Key::Expr(e) => eval(e, ctx)?,
            });
        }
        produced.push((values, sort_values));
        Ok(())
    };

    if grouped {
        let mut groups: Vec<(Vec<OVal>, Vec<&JobRecord>)> = Vec::new();
        if keys.is_empty() {
            groups.push((Vec::new(), kept.clone()));
        } else {
            for r in &kept {
                let mut kv = Vec::new();
                for k in &keys {
                    kv.push(eval(k, &Ctx::Row(r))?);
                }
                let mut found = false;
                for g in groups.iter_mut() {
                    if g.0.iter().zip(&kv).all(|(a, b)| same_group_value(a, b)) {
                        g.1.push(r);
                        found = true;
                        break;
                    }
                }
                if !found {
                    groups.push((kv, vec![r]));
                }
            }
        }
        for (_, members) in &groups {
            let ctx = Ctx::Group { members, keys: &keys };
            emit(&ctx, &mut produced)?;
        }
    } else {
        for r in &kept {
            emit(&Ctx::Row(r), &mut produced)?;
        }
    }

    // insertion sort keeps ties in input order
    for i in 1..produced.len() {
        let mut j = i;
        while j > 0 && order_cmp(&produced[j - 1].1, &produced[j].1, &dirs) == Ordering::Greater {
            produced.swap(j - 1, j);
            j -= 1;
        }
    }
    let mut out: Vec<Vec<OVal>> = produced.into_iter().map(|p| p.0).collect();
    if let Some(n) = q.limit {
        out.truncate(n as usize);
    }
    Ok(OracleResult { columns, rows: out })
}
