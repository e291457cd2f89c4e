//! Seeded generators for small `jobs` datasets and well-typed queries from
//! the supported subset.

use chrono::{Duration, TimeZone, Utc};
use ctra_core::datastore::JobRecord;
use ctra_core::sql::{
    AggregateFunc, BinaryOp, CastType, Expr, OrderItem, QueryAst, SelectItem, SortDirection, DAY_PATTERN, WEEK_PATTERN,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;
use serde_json::{json, Map, Value};

const STATES: &[&str] = &["COMPLETED", "IN_ERROR", "RUNNING", "PAUSED"];
const TEXT_COLS: &[&str] = &["state", "lab_id", "workflow_id", "name", "root_action_id"];
const TS_COLS: &[&str] = &["created_timestamp", "started_timestamp", "completed_timestamp"];
const JSON_COLS: &[&str] = &["outputs", "parameters"];

fn ts_text(micros: i64) -> String {
    Utc.timestamp_micros(micros)
        .unwrap()
        .format("%Y-%m-%dT%H:%M:%S%.6fZ")
        .to_string()
}

fn json_payload(rng: &mut ChaCha8Rng, dirty: bool) -> Value {
    if rng.gen_bool(0.1) {
        return json!([1, 2]);
    }
    let mut m = Map::new();
    if rng.gen_bool(0.9) {
        let n = if dirty && rng.gen_bool(0.05) {
            "x".to_string()
        } else {
            rng.gen_range(0..50).to_string()
        };
        m.insert("n".into(), json!(n));
    }
    match rng.gen_range(0..10) {
        0 => {
            m.insert("m".into(), Value::Null);
        }
        1..=4 => {
            m.insert("m".into(), json!(rng.gen_range(-20..100)));
        }
        5..=8 => {
            m.insert("m".into(), json!(rng.gen_range(0..1000) as f64 / 10.0));
        }
        _ => {}
    }
    if rng.gen_bool(0.8) {
        m.insert("k".into(), json!(["alpha", "beta", "gamma"].choose(rng).unwrap()));
    }
    if rng.gen_bool(0.2) {
        m.insert("z".into(), json!(rng.gen_range(0..5)));
    }
    Value::Object(m)
}

/// Up to `max_rows` records; some datasets contain non-numeric `n` values.
pub fn random_dataset(rng: &mut ChaCha8Rng, max_rows: usize) -> Vec<JobRecord> {
    let n = if rng.gen_bool(0.05) {
        0
    } else {
        rng.gen_range(1..=max_rows)
    };
    let dirty = rng.gen_bool(0.2);
    let base = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap().timestamp_micros();
    (0..n)
        .map(|i| {
            let created = base + rng.gen_range(0..20 * 86_400) * 1_000_000 + rng.gen_range(0..1_000_000);
            let started = rng
                .gen_bool(0.7)
                .then(|| created + rng.gen_range(0..7_200) * 1_000_000 + rng.gen_range(0..1000));
            let completed = started.and_then(|s| {
                rng.gen_bool(0.7).then(|| {
                    s + (Duration::seconds(rng.gen_range(1..20_000)))
                        .num_microseconds()
                        .unwrap()
                })
            });
            let mut obj = json!({
                "id": format!("job-{i:04}"),
                "name": format!("n{}", rng.gen_range(0..6)),
                "lab_id": format!("lab-{}", rng.gen_range(1..4)),
                "workflow_id": format!("wf-{}", rng.gen_range(1..5)),
                "state": *STATES.choose(rng).unwrap(),
                "created_timestamp": ts_text(created),
            });
            if let Some(s) = started {
                obj["started_timestamp"] = json!(ts_text(s));
            }
            if let Some(c) = completed {
                obj["completed_timestamp"] = json!(ts_text(c));
            }
            if rng.gen_bool(0.5) {
                obj["root_action_id"] = json!(format!("ra-{}", rng.gen_range(0..4)));
            }
            if rng.gen_bool(0.85) {
                obj["outputs"] = json_payload(rng, dirty);
            }
            if rng.gen_bool(0.7) {
                obj["parameters"] = json_payload(rng, false);
            }
            JobRecord::from_json_object(obj.as_object().unwrap(), i).expect("generated record is valid")
        })
        .collect()
}

fn col(name: &str) -> Expr {
    Expr::column(name)
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).unwrap()
}

fn num_literal(rng: &mut ChaCha8Rng) -> Expr {
    if rng.gen_bool(0.7) {
        Expr::number(Decimal::from(rng.gen_range(-5..50)))
    } else {
        Expr::number(Decimal::new(rng.gen_range(-50..500), 1))
    }
}

fn json_access(rng: &mut ChaCha8Rng, key: &str, as_text: bool) -> Expr {
    Expr::JsonAccess {
        column: pick(rng, JSON_COLS).to_string(),
        key: key.to_string(),
        as_text,
    }
}

fn cast(e: Expr, rng: &mut ChaCha8Rng) -> Expr {
    Expr::Cast {
        expr: Box::new(e),
        target: if rng.gen_bool(0.7) {
            CastType::Float
        } else {
            CastType::Numeric
        },
    }
}

fn ts_leaf(rng: &mut ChaCha8Rng) -> Expr {
    if rng.gen_bool(0.1) {
        Expr::text("2024-01-05T12:00:00Z")
    } else {
        col(pick(rng, TS_COLS))
    }
}

fn num_leaf(rng: &mut ChaCha8Rng) -> Expr {
    match rng.gen_range(0..7) {
        0 | 1 => num_literal(rng),
        2 => Expr::ExtractEpoch {
            end: Box::new(ts_leaf(rng)),
            start: Box::new(ts_leaf(rng)),
        },
        3 => {
            let access = json_access(rng, "n", true);
            cast(Expr::Coalesce(vec![access, Expr::text("0")]), rng)
        }
        4 => {
            let key = pick(rng, &["m", "m", "m", "z"]);
            let as_text = rng.gen_bool(0.5);
            let access = json_access(rng, key, as_text);
            cast(access, rng)
        }
        5 => cast(Expr::text("3.5"), rng),
        _ => {
            let access = json_access(rng, "m", false);
            cast(Expr::Coalesce(vec![access, Expr::text("0")]), rng)
        }
    }
}

pub(crate) fn num_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.4) {
        return num_leaf(rng);
    }
    match rng.gen_range(0..10) {
        0..=5 => {
            let op = *[BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div]
                .choose(rng)
                .unwrap();
            let left = num_expr(rng, depth - 1);
            let right = if op == BinaryOp::Div && rng.gen_bool(0.8) {
                Expr::number(Decimal::from(rng.gen_range(1..9)))
            } else {
                num_expr(rng, depth - 1)
            };
            Expr::binary(op, left, right)
        }
        6 => Expr::Negate(Box::new(num_expr(rng, depth - 1))),
        _ => Expr::Coalesce(vec![num_expr(rng, depth - 1), num_literal(rng)]),
    }
}

fn text_expr(rng: &mut ChaCha8Rng) -> Expr {
    match rng.gen_range(0..8) {
        0..=2 => col(pick(rng, TEXT_COLS)),
        3 => Expr::ToChar {
            expr: Box::new(col(pick(rng, TS_COLS))),
            pattern: if rng.gen_bool(0.5) { DAY_PATTERN } else { WEEK_PATTERN }.to_string(),
        },
        4 | 5 => {
            let key = pick(rng, &["k", "n"]);
            json_access(rng, key, true)
        }
        6 => Expr::Coalesce(vec![col("root_action_id"), Expr::text("none")]),
        _ => Expr::text(pick(rng, &["COMPLETED", "lab-2", "beta", "n3"])),
    }
}

fn bool_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    let cmp = *[
        BinaryOp::Eq,
        BinaryOp::NotEq,
        BinaryOp::Lt,
        BinaryOp::LtEq,
        BinaryOp::Gt,
        BinaryOp::GtEq,
    ]
    .choose(rng)
    .unwrap();
    if depth > 0 && rng.gen_bool(0.3) {
        let op = if rng.gen_bool(0.5) { BinaryOp::And } else { BinaryOp::Or };
        return Expr::binary(op, bool_expr(rng, depth - 1), bool_expr(rng, depth - 1));
    }
    match rng.gen_range(0..6) {
        0 | 1 => Expr::binary(cmp, num_expr(rng, 1), num_literal(rng)),
        2 => Expr::binary(
            cmp,
            col(pick(rng, TEXT_COLS)),
            Expr::text(pick(rng, &["COMPLETED", "RUNNING", "lab-2", "wf-3", "n2"])),
        ),
        3 => Expr::binary(cmp, col(pick(rng, TS_COLS)), Expr::text("2024-01-10T00:00:00Z")),
        4 => Expr::binary(cmp, json_access(rng, "k", true), Expr::text("beta")),
        _ => {
            let inner = if rng.gen_bool(0.5) {
                col(pick(
                    rng,
                    &["started_timestamp", "completed_timestamp", "root_action_id", "outputs"],
                ))
            } else {
                let key = pick(rng, &["k", "z", "m"]);
                let as_text = rng.gen_bool(0.5);
                json_access(rng, key, as_text)
            };
            Expr::IsNull {
                expr: Box::new(inner),
                negated: rng.gen_bool(0.5),
            }
        }
    }
}

fn aggregate_expr(rng: &mut ChaCha8Rng) -> Expr {
    let base = match rng.gen_range(0..7) {
        0 => Expr::aggregate(AggregateFunc::Count, None),
        1 => Expr::aggregate(
            AggregateFunc::Count,
            Some(col(pick(rng, &["started_timestamp", "root_action_id", "outputs"]))),
        ),
        2 => Expr::aggregate(AggregateFunc::Sum, Some(num_expr(rng, 1))),
        3 => Expr::aggregate(AggregateFunc::Avg, Some(num_expr(rng, 1))),
        4 => {
            let f = if rng.gen_bool(0.5) {
                AggregateFunc::Min
            } else {
                AggregateFunc::Max
            };
            Expr::aggregate(f, Some(num_expr(rng, 1)))
        }
        5 => {
            let f = if rng.gen_bool(0.5) {
                AggregateFunc::Min
            } else {
                AggregateFunc::Max
            };
            Expr::aggregate(f, Some(col(pick(rng, &["name", "workflow_id", "root_action_id"]))))
        }
        _ => Expr::ToChar {
            expr: Box::new(Expr::aggregate(AggregateFunc::Max, Some(col(pick(rng, TS_COLS))))),
            pattern: DAY_PATTERN.to_string(),
        },
    };
    let numeric = !matches!(base, Expr::ToChar { .. }) && !is_text_aggregate(&base);
    match rng.gen_range(0..8) {
        0 if numeric => Expr::Coalesce(vec![base, Expr::number(Decimal::ZERO)]),
        1 if numeric => Expr::binary(BinaryOp::Div, base, Expr::aggregate(AggregateFunc::Count, None)),
        _ => base,
    }
}

fn is_text_aggregate(e: &Expr) -> bool {
    matches!(e, Expr::Aggregate { func: AggregateFunc::Min | AggregateFunc::Max, arg: ctra_core::sql::AggregateArg::Expr(inner) } if matches!(inner.as_ref(), Expr::Column(_)))
}

fn group_key(rng: &mut ChaCha8Rng) -> Expr {
    match rng.gen_range(0..6) {
        0 | 1 => col(pick(rng, TEXT_COLS)),
        2 => Expr::ToChar {
            expr: Box::new(col(pick(rng, TS_COLS))),
            pattern: if rng.gen_bool(0.5) { DAY_PATTERN } else { WEEK_PATTERN }.to_string(),
        },
        3 => json_access(rng, "k", true),
        4 => {
            let access = json_access(rng, "n", true);
            cast(Expr::Coalesce(vec![access, Expr::text("0")]), rng)
        }
        _ => Expr::IsNull {
            expr: Box::new(col("started_timestamp")),
            negated: false,
        },
    }
}

fn direction(rng: &mut ChaCha8Rng) -> SortDirection {
    if rng.gen_bool(0.5) {
        SortDirection::Desc
    } else {
        SortDirection::Asc
    }
}

fn ordinal(i: usize) -> Expr {
    Expr::number(Decimal::from(i as u64 + 1))
}

fn grouped_query(rng: &mut ChaCha8Rng) -> QueryAst {
    let global = rng.gen_bool(0.2);
    let mut keys: Vec<Expr> = Vec::new();
    if !global {
        for _ in 0..rng.gen_range(1..=2) {
            let k = group_key(rng);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
    }
    let mut items: Vec<SelectItem> = Vec::new();
    for k in &keys {
        if items.len() < 2 && rng.gen_bool(0.8) {
            items.push(SelectItem {
                expr: k.clone(),
                alias: None,
            });
        }
    }
    let target = rng.gen_range(items.len().max(1)..=3);
    while items.len() < target {
        items.push(SelectItem {
            expr: aggregate_expr(rng),
            alias: None,
        });
    }
    for (i, item) in items.iter_mut().enumerate() {
        if rng.gen_bool(0.5) {
            item.alias = Some(format!("c{}", i + 1));
        }
    }
    let group_by = keys
        .iter()
        .map(|k| match items.iter().position(|s| &s.expr == k) {
            Some(i) if rng.gen_bool(0.3) => ordinal(i),
            Some(i) if items[i].alias.is_some() && rng.gen_bool(0.5) => col(items[i].alias.as_ref().unwrap()),
            _ => k.clone(),
        })
        .collect();
    let mut order_by = Vec::new();
    for _ in 0..rng.gen_range(0..=2) {
        let i = rng.gen_range(0..items.len());
        let expr = match rng.gen_range(0..4) {
            0 => ordinal(i),
            1 if items[i].alias.is_some() => col(items[i].alias.as_ref().unwrap()),
            2 => aggregate_expr(rng),
            _ => items[i].expr.clone(),
        };
        order_by.push(OrderItem {
            expr,
            direction: direction(rng),
        });
    }
    QueryAst {
        select_items: items,
        from_table: "jobs".into(),
        where_clause: rng.gen_bool(0.5).then(|| bool_expr(rng, 2)),
        group_by,
        order_by,
        limit: rng.gen_bool(0.3).then(|| rng.gen_range(0..6)),
    }
}

fn plain_query(rng: &mut ChaCha8Rng) -> QueryAst {
    let n = rng.gen_range(1..=3);
    let mut items = Vec::new();
    for i in 0..n {
        let expr = match rng.gen_range(0..6) {
            0 | 1 => num_expr(rng, 2),
            2 | 3 => text_expr(rng),
            4 => bool_expr(rng, 1),
            _ => {
                if rng.gen_bool(0.5) {
                    col(pick(rng, TS_COLS))
                } else {
                    let key = pick(rng, &["m", "k"]);
                    json_access(rng, key, false)
                }
            }
        };
        items.push(SelectItem {
            expr,
            alias: rng.gen_bool(0.5).then(|| format!("c{}", i + 1)),
        });
    }
    let mut order_by = Vec::new();
    for _ in 0..rng.gen_range(0..=2) {
        let i = rng.gen_range(0..items.len());
        let expr = match rng.gen_range(0..4) {
            0 => ordinal(i),
            1 if items[i].alias.is_some() => col(items[i].alias.as_ref().unwrap()),
            2 => num_expr(rng, 1),
            _ => text_expr(rng),
        };
        let expr = if matches!(expr, Expr::Literal(_)) {
            ordinal(i)
        } else {
            expr
        };
        order_by.push(OrderItem {
            expr,
            direction: direction(rng),
        });
    }
    QueryAst {
        select_items: items,
        from_table: "jobs".into(),
        where_clause: rng.gen_bool(0.6).then(|| bool_expr(rng, 2)),
        group_by: Vec::new(),
        order_by,
        limit: rng.gen_bool(0.3).then(|| rng.gen_range(0..10)),
    }
}

/// A query from the subset, well-typed against the `jobs` schema.
pub fn random_query(rng: &mut ChaCha8Rng) -> QueryAst {
    if rng.gen_bool(0.55) {
        grouped_query(rng)
    } else {
        plain_query(rng)
    }
}
