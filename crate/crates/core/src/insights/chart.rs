use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::engine::{ResultSet, ScalarValue};

pub const MAX_BAR_CATEGORIES: usize = 10;
pub const PLACEHOLDER_MESSAGE: &str = "Data Unavailable";

/// Preferred visualization taken from a question's "(Suitable for ... chart)"
/// suffix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartHint {
    Bar,
    Line,
    None,
}

fn hint_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\(\s*suitable\s+for\s+(?:an?\s+)?([a-z][a-z \-]*?)\s*(?:chart|graph|plot)s?\s*\)\s*$").unwrap()
    })
}

impl ChartHint {
    /// Any requested kind other than a line maps to a bar chart.
    pub fn parse_suffix(question: &str) -> ChartHint {
        match hint_re().captures(question.trim_end()) {
            Some(c) if c[1].to_ascii_lowercase().contains("line") => ChartHint::Line,
            Some(_) => ChartHint::Bar,
            None => ChartHint::None,
        }
    }
}

/// Question text with the chart-hint suffix removed.
pub fn strip_hint(question: &str) -> &str {
    match hint_re().find(question.trim_end()) {
        Some(m) => question[..m.start()].trim_end(),
        None => question.trim(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Bar,
    Line,
    DualAxis,
    Placeholder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<Decimal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub kind: ChartKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub categories: Vec<String>,
    pub series: Vec<Series>,
    pub filename: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl ChartSpec {
    pub fn placeholder(title: impl Into<String>, filename: impl Into<String>) -> Self {
        ChartSpec {
            kind: ChartKind::Placeholder,
            title: title.into(),
            x_label: String::new(),
            y_label: String::new(),
            categories: Vec::new(),
            series: Vec::new(),
            filename: filename.into(),
            message: Some(PLACEHOLDER_MESSAGE.to_string()),
        }
    }

    /// Structural checks every renderable spec satisfies.
    pub fn check(&self) -> Result<(), String> {
        if self.kind == ChartKind::Placeholder {
            return if self.message.as_deref() == Some(PLACEHOLDER_MESSAGE) {
                Ok(())
            } else {
                Err("placeholder without message".into())
            };
        }
        if self.series.is_empty() {
            return Err("no series".into());
        }
        if let Some(s) = self.series.iter().find(|s| s.values.len() != self.categories.len()) {
            return Err(format!(
                "series {} has {} values for {} categories",
                s.name,
                s.values.len(),
                self.categories.len()
            ));
        }
        if self.kind == ChartKind::DualAxis && self.series.len() != 2 {
            return Err("dual axis needs exactly two series".into());
        }
        if self.kind == ChartKind::Bar && self.categories.len() > MAX_BAR_CATEGORIES {
            return Err(format!("{} bar categories", self.categories.len()));
        }
        Ok(())
    }
}

fn date_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\d{4}-\d{2}-\d{2}([ T].*)?|\d{4}-W\d{2})$").unwrap())
}

fn label(v: &ScalarValue) -> String {
    match v {
        ScalarValue::Null => "(null)".to_string(),
        other => other.to_string(),
    }
}

fn is_date_column(rows: &[Vec<ScalarValue>]) -> bool {
    let mut any = false;
    for r in rows {
        match &r[0] {
            ScalarValue::Null => {}
            ScalarValue::Timestamp(_) => any = true,
            ScalarValue::Text(s) if date_re().is_match(s) => any = true,
            _ => return false,
        }
    }
    any
}

/// Values of column `i` as numbers with nulls as zero, or None when some
/// value is not numeric.
fn numeric_column(rows: &[Vec<ScalarValue>], i: usize) -> Option<Vec<Decimal>> {
    rows.iter()
        .map(|r| match &r[i] {
            ScalarValue::Null => Some(Decimal::ZERO),
            ScalarValue::Number(d) => Some(*d),
            ScalarValue::Text(s) => Decimal::from_str(s.trim())
                .or_else(|_| Decimal::from_scientific(s.trim()))
                .ok(),
            _ => None,
        })
        .collect()
}

fn title_of(question: &str) -> String {
    let q = strip_hint(question);
    const MAX: usize = 80;
    if q.chars().count() <= MAX {
        q.to_string()
    } else {
        let cut: String = q.chars().take(MAX - 3).collect();
        format!("{}...", cut.trim_end())
    }
}

/// The `MAX_BAR_CATEGORIES` largest entries by value, descending; ties keep
/// result order.
fn top_by<T>(mut items: Vec<(T, Decimal)>) -> Vec<T> {
    items.sort_by_key(|item| std::cmp::Reverse(item.1));
    items.truncate(MAX_BAR_CATEGORIES);
    items.into_iter().map(|(t, _)| t).collect()
}

/// Rule-based chart choice mirroring the charting instructions: dates on x
/// give lines (two metrics give a dual axis, a category column gives one
/// line per category), categories give bars limited to the top ten by value.
pub fn spec_from_result(question: &str, hint: ChartHint, result: &ResultSet, filename: &str) -> ChartSpec {
    let title = title_of(question);
    let ncols = result.columns.len();
    if result.rows.is_empty() || !(2..=3).contains(&ncols) {
        return ChartSpec::placeholder(title, filename);
    }
    let rows = &result.rows;
    let names: Vec<String> = result.columns.iter().map(|c| c.name.clone()).collect();
    let x: Vec<String> = rows.iter().map(|r| label(&r[0])).collect();
    let v1 = numeric_column(rows, 1);
    let v2 = if ncols == 3 { numeric_column(rows, 2) } else { None };
    let dates = is_date_column(rows);
    let base = |kind, categories, series: Vec<Series>| ChartSpec {
        kind,
        title: title.clone(),
        x_label: names[0].clone(),
        y_label: series.first().map(|s: &Series| s.name.clone()).unwrap_or_default(),
        categories,
        series,
        filename: filename.to_string(),
        message: None,
    };

    match (ncols, v1, v2) {
        (2, Some(v1), _) => {
            if dates || (hint == ChartHint::Line && numeric_column(rows, 0).is_some()) {
                let mut pts: Vec<(String, Decimal)> = x.into_iter().zip(v1).collect();
                if dates {
                    pts.sort_by(|a, b| a.0.cmp(&b.0));
                }
                let (cats, vals) = pts.into_iter().unzip();
                base(
                    ChartKind::Line,
                    cats,
                    vec![Series {
                        name: names[1].clone(),
                        values: vals,
                    }],
                )
            } else {
                let top = top_by(x.into_iter().zip(v1).map(|(c, v)| ((c, v), v)).collect());
                let (cats, vals) = top.into_iter().unzip();
                base(
                    ChartKind::Bar,
                    cats,
                    vec![Series {
                        name: names[1].clone(),
                        values: vals,
                    }],
                )
            }
        }
        (3, Some(v1), Some(v2)) => {
            let mut pts: Vec<(String, Decimal, Decimal)> =
                x.into_iter().zip(v1).zip(v2).map(|((c, a), b)| (c, a, b)).collect();
            if dates {
                pts.sort_by(|a, b| a.0.cmp(&b.0));
            } else {
                pts = top_by(
                    pts.into_iter()
                        .map(|p| {
                            let k = p.1;
                            (p, k)
                        })
                        .collect(),
                );
            }
            let cats = pts.iter().map(|p| p.0.clone()).collect();
            let series = vec![
                Series {
                    name: names[1].clone(),
                    values: pts.iter().map(|p| p.1).collect(),
                },
                Series {
                    name: names[2].clone(),
                    values: pts.iter().map(|p| p.2).collect(),
                },
            ];
            base(ChartKind::DualAxis, cats, series)
        }
        (3, None, Some(v2)) => pivot(rows, x, v2, dates, &names, base),
        _ => ChartSpec::placeholder(title, filename),
    }
}

/// (x, group, value) rows: one series per group. Dates keep every x value
/// on a line chart; categories become grouped bars ranked by row total.
fn pivot(
    rows: &[Vec<ScalarValue>],
    x: Vec<String>,
    values: Vec<Decimal>,
    dates: bool,
    names: &[String],
    base: impl Fn(ChartKind, Vec<String>, Vec<Series>) -> ChartSpec,
) -> ChartSpec {
    let mut xs: Vec<String> = Vec::new();
    let mut groups: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(usize, usize), Decimal> = BTreeMap::new();
    for ((r, xv), v) in rows.iter().zip(x).zip(values) {
        let xi = xs.iter().position(|c| *c == xv).unwrap_or_else(|| {
            xs.push(xv);
            xs.len() - 1
        });
        let g = label(&r[1]);
        let gi = groups.iter().position(|c| *c == g).unwrap_or_else(|| {
            groups.push(g);
            groups.len() - 1
        });
        *cells.entry((xi, gi)).or_insert(Decimal::ZERO) += v;
    }
    let cell = |xi: usize, gi: usize| cells.get(&(xi, gi)).copied().unwrap_or(Decimal::ZERO);
    let order: Vec<usize> = if dates {
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.sort_by(|&a, &b| xs[a].cmp(&xs[b]));
        idx
    } else {
        top_by(
            (0..xs.len())
                .map(|xi| (xi, (0..groups.len()).map(|gi| cell(xi, gi)).sum()))
                .collect(),
        )
    };
    let series = groups
        .iter()
        .enumerate()
        .map(|(gi, g)| Series {
            name: g.clone(),
            values: order.iter().map(|&xi| cell(xi, gi)).collect(),
        })
        .collect();
    let categories = order.iter().map(|&xi| xs[xi].clone()).collect();
    let mut spec = base(if dates { ChartKind::Line } else { ChartKind::Bar }, categories, series);
    spec.y_label = names[2].clone();
    spec
}
