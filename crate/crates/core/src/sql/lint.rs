//! Schema-aware checks that turn a parsed query into a ValidationReport.
//! Suggestions are rule-based so the verdict is deterministic.

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::parser::parse;
use super::render::render_expr;
use super::typeck::{
    self, infer, is_grouped, resolve_group_keys, resolve_order, ungrouped, Clause, OrderTarget, SqlType, TypeError,
};
use super::{ParseError, ParseErrorKind};
use crate::datastore::TableSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LintCategory {
    Syntax,
    Cte,
    Subquery,
    WindowFunction,
    Unsupported,
    UnknownTable,
    UnknownColumn,
    ColumnCount,
    MissingGroupBy,
    AggregateMisuse,
    TimestampOutput,
    JsonbAccess,
    TypeMismatch,
    InvalidReference,
}

impl LintCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            LintCategory::Syntax => "syntax",
            LintCategory::Cte => "cte",
            LintCategory::Subquery => "subquery",
            LintCategory::WindowFunction => "window_function",
            LintCategory::Unsupported => "unsupported",
            LintCategory::UnknownTable => "unknown_table",
            LintCategory::UnknownColumn => "unknown_column",
            LintCategory::ColumnCount => "column_count",
            LintCategory::MissingGroupBy => "missing_group_by",
            LintCategory::AggregateMisuse => "aggregate_misuse",
            LintCategory::TimestampOutput => "timestamp_output",
            LintCategory::JsonbAccess => "jsonb_access",
            LintCategory::TypeMismatch => "type_mismatch",
            LintCategory::InvalidReference => "invalid_reference",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub category: LintCategory,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<String>,
}

impl Finding {
    fn new(category: LintCategory, message: impl Into<String>, suggestion: Option<String>) -> Self {
        Finding {
            category,
            message: message.into(),
            suggestion,
        }
    }
}

impl From<TypeError> for Finding {
    fn from(e: TypeError) -> Self {
        Finding::new(e.category, e.message, e.suggestion)
    }
}

impl From<&ParseError> for Finding {
    fn from(e: &ParseError) -> Self {
        let (category, suggestion) = match e.kind {
            ParseErrorKind::Syntax => (LintCategory::Syntax, None),
            ParseErrorKind::Empty => (
                LintCategory::Syntax,
                Some("Write a single SELECT statement".to_string()),
            ),
            ParseErrorKind::Cte => (
                LintCategory::Cte,
                Some("Rewrite as a single top-level SELECT without WITH".to_string()),
            ),
            ParseErrorKind::Subquery => (
                LintCategory::Subquery,
                Some("Remove the subquery; use one SELECT with WHERE and GROUP BY".to_string()),
            ),
            ParseErrorKind::WindowFunction => (
                LintCategory::WindowFunction,
                Some("Replace the window function with GROUP BY aggregation".to_string()),
            ),
            ParseErrorKind::NestedJsonAccess => (
                LintCategory::JsonbAccess,
                Some("Access only top-level JSONB keys, e.g. outputs->>'error_log_count'".to_string()),
            ),
            ParseErrorKind::Unsupported => (LintCategory::Unsupported, None),
        };
        Finding::new(category, e.to_string(), suggestion)
    }
}

/// The `{is_valid, errors, suggestions}` verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub is_valid: bool,
    pub errors: Vec<String>,
    pub suggestions: Vec<String>,
}

impl ValidationReport {
    pub fn valid() -> Self {
        ValidationReport {
            is_valid: true,
            errors: Vec::new(),
            suggestions: Vec::new(),
        }
    }

    pub fn from_findings(findings: &[Finding]) -> Self {
        let mut suggestions: Vec<String> = Vec::new();
        for s in findings.iter().filter_map(|f| f.suggestion.as_ref()) {
            if !suggestions.contains(s) {
                suggestions.push(s.clone());
            }
        }
        ValidationReport {
            is_valid: findings.is_empty(),
            errors: findings.iter().map(|f| f.message.clone()).collect(),
            suggestions,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn lint(ast: &QueryAst, schema: &TableSchema) -> ValidationReport {
    ValidationReport::from_findings(&lint_findings(ast, schema))
}

/// Parses and lints in one step; the AST is returned when parsing succeeded.
pub fn lint_sql(sql: &str, schema: &TableSchema) -> (Option<QueryAst>, Vec<Finding>) {
    match parse(sql) {
        Ok(ast) => {
            let findings = lint_findings(&ast, schema);
            (Some(ast), findings)
        }
        Err(e) => (None, vec![Finding::from(&e)]),
    }
}

pub fn lint_findings(ast: &QueryAst, schema: &TableSchema) -> Vec<Finding> {
    let mut findings = Vec::new();

    if ast.from_table != schema.table_name {
        findings.push(Finding::new(
            LintCategory::UnknownTable,
            format!("relation \"{}\" does not exist", ast.from_table),
            Some(format!("Query the '{}' table", schema.table_name)),
        ));
    }

    let n = ast.select_items.len();
    if !(2..=3).contains(&n) {
        let noun = if n == 1 { "column" } else { "columns" };
        findings.push(Finding::new(
            LintCategory::ColumnCount,
            format!("Query returns {n} {noun}, need 2-3"),
            Some("Select 2-3 columns, e.g. a grouping column and one or two aggregates".into()),
        ));
    }

    let group_keys = match resolve_group_keys(ast, schema) {
        Ok(keys) => Some(keys),
        Err(e) => {
            findings.push(e.into());
            None
        }
    };
    let order = match resolve_order(ast) {
        Ok(o) => Some(o),
        Err(e) => {
            findings.push(e.into());
            None
        }
    };
    let order_exprs: Vec<&Expr> = order
        .iter()
        .flatten()
        .filter_map(|(t, _)| match t {
            OrderTarget::Input(e) => Some(e),
            OrderTarget::Output(_) => None,
        })
        .collect();

    // Unknown columns first; type errors on top of them would only be noise.
    let mut exprs: Vec<&Expr> = ast.select_items.iter().map(|s| &s.expr).collect();
    exprs.extend(ast.where_clause.iter());
    exprs.extend(group_keys.iter().flatten());
    exprs.extend(order_exprs.iter().copied());
    let mut unknown: Vec<&str> = Vec::new();
    for e in &exprs {
        e.for_each_column(&mut |c| {
            if schema.column(c).is_none() && !unknown.contains(&c) {
                unknown.push(c);
            }
        });
    }
    if !unknown.is_empty() {
        for c in unknown {
            if let Err(e) = typeck::column_type(schema, c) {
                findings.push(e.into());
            }
        }
        return findings;
    }

    for item in &ast.select_items {
        match infer(&item.expr, schema, Clause::Select) {
            Ok(SqlType::Timestamp) => findings.push(Finding::new(
                LintCategory::TimestampOutput,
                format!(
                    "timestamp output {} must be formatted with TO_CHAR",
                    render_expr(&item.expr)
                ),
                Some(format!("Use TO_CHAR({}, 'YYYY-MM-DD')", render_expr(&item.expr))),
            )),
            Ok(SqlType::Json) => findings.push(Finding::new(
                LintCategory::JsonbAccess,
                format!("JSONB output {} is not allowed", render_expr(&item.expr)),
                Some(json_hint(&item.expr)),
            )),
            Ok(_) => {}
            Err(e) => findings.push(e.into()),
        }
    }

    if let Some(w) = &ast.where_clause {
        match infer(w, schema, Clause::Where) {
            Ok(SqlType::Bool | SqlType::Null) => {}
            Ok(t) => findings.push(Finding::new(
                LintCategory::TypeMismatch,
                format!("argument of WHERE must be type boolean, not type {}", t.name()),
                None,
            )),
            Err(e) => findings.push(e.into()),
        }
    }

    for (clause, list) in [
        (Clause::GroupBy, group_keys.iter().flatten().collect::<Vec<_>>()),
        (Clause::OrderBy, order_exprs.clone()),
    ] {
        for e in list {
            match infer(e, schema, clause) {
                Ok(SqlType::Json) => findings.push(Finding::new(
                    LintCategory::JsonbAccess,
                    format!("cannot sort or group by JSONB value {}", render_expr(e)),
                    Some(json_hint(e)),
                )),
                Ok(_) => {}
                Err(e) => findings.push(e.into()),
            }
        }
    }

    if is_grouped(ast) {
        if let Some(keys) = &group_keys {
            let mut checked: Vec<&Expr> = ast.select_items.iter().map(|s| &s.expr).collect();
            checked.extend(order_exprs.iter().copied());
            for e in checked {
                if let Some(col) = ungrouped(e, keys) {
                    let fix = if e.contains_aggregate() { col } else { e };
                    findings.push(Finding::new(
                        LintCategory::MissingGroupBy,
                        format!(
                            "column \"{}\" must appear in the GROUP BY clause or be used in an aggregate function",
                            column_label(col)
                        ),
                        Some(format!("Add GROUP BY {}", render_expr(fix))),
                    ));
                }
            }
        }
    }

    dedup(findings)
}

fn json_hint(e: &Expr) -> String {
    match e {
        Expr::Column(c) | Expr::JsonAccess { column: c, .. } => {
            format!("Select a top-level key as text, e.g. {c}->>'key'")
        }
        _ => "Select a top-level key as text with ->>".to_string(),
    }
}

fn column_label(e: &Expr) -> String {
    match e {
        Expr::Column(c) => c.clone(),
        other => render_expr(other),
    }
}

fn dedup(findings: Vec<Finding>) -> Vec<Finding> {
    let mut out: Vec<Finding> = Vec::with_capacity(findings.len());
    for f in findings {
        if !out.contains(&f) {
            out.push(f);
        }
    }
    out
}
