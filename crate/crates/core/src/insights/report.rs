use std::fmt::Write as _;
use std::sync::OnceLock;

use regex::Regex;
use rust_decimal::Decimal;
use serde::Serialize;

use super::chart::strip_hint;
use crate::engine::{ResultSet, ScalarValue};
use crate::llm::{Gateway, PromptContext, Role};

pub const RECOMMENDATION_COUNT: usize = 5;
const TABLE_ROWS: usize = 20;
const PROMPT_ROWS: usize = 50;

/// What the report needs to know about one question.
#[derive(Debug, Clone, Copy)]
pub struct AnalysisInput<'a> {
    pub question: &'a str,
    pub sql: Option<&'a str>,
    pub result: Option<&'a ResultSet>,
    pub attempts: usize,
    pub last_error: Option<&'a str>,
    pub plot_reference: Option<&'a str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisSection {
    pub question: String,
    pub results_table: String,
    pub insight: String,
    pub plot_reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportDocument {
    pub introduction: String,
    pub analyses: Vec<AnalysisSection>,
    pub recommendations: Vec<String>,
    pub conclusion: String,
    /// True when the narrative was assembled without the report model.
    pub fallback: bool,
}

fn fmt_num(d: &Decimal) -> String {
    d.round_dp(2).normalize().to_string()
}

fn cell(v: &ScalarValue) -> String {
    match v {
        ScalarValue::Number(d) => fmt_num(d),
        other => other.to_string(),
    }
}

fn table_lines(result: &ResultSet, limit: usize) -> String {
    if result.rows.is_empty() {
        return "(no rows)".to_string();
    }
    let header: Vec<String> = result.columns.iter().map(|c| c.name.clone()).collect();
    let body: Vec<Vec<String>> = result
        .rows
        .iter()
        .take(limit)
        .map(|r| r.iter().map(cell).collect())
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join(" | ").trim_end().to_string()
    };
    let mut out = vec![line(&header)];
    out.push(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    out.extend(body.iter().map(|r| line(r)));
    if result.rows.len() > limit {
        out.push(format!("({} more rows)", result.rows.len() - limit));
    }
    out.join("\n")
}

/// Aligned plain-text table, first rows only.
pub fn results_table(result: &ResultSet) -> String {
    table_lines(result, TABLE_ROWS)
}

/// The `{queries_results}` block: one entry per question with its
/// columns and rows, or the failure.
pub fn queries_results_text(inputs: &[AnalysisInput]) -> String {
    let mut out = String::new();
    for (i, a) in inputs.iter().enumerate() {
        let _ = writeln!(out, "Query {}: {}", i + 1, a.question);
        if let Some(sql) = a.sql {
            let _ = writeln!(out, "SQL: {}", sql.replace('\n', " "));
        }
        match a.result {
            Some(r) => {
                let _ = writeln!(out, "Columns: {}", r.column_names().join(", "));
                let _ = writeln!(out, "Data:\n{}", table_lines(r, PROMPT_ROWS));
            }
            None => {
                let _ = writeln!(out, "Status: failed after {} attempts", a.attempts);
                if let Some(e) = a.last_error {
                    let _ = writeln!(out, "Last error: {e}");
                }
            }
        }
        match a.plot_reference {
            Some(p) => {
                let _ = writeln!(out, "Plot: {p}");
            }
            None => {
                let _ = writeln!(out, "Plot: none");
            }
        }
        out.push('\n');
    }
    out.trim_end().to_string()
}

fn numeric(v: &ScalarValue) -> Option<Decimal> {
    match v {
        ScalarValue::Number(d) => Some(*d),
        ScalarValue::Null => Some(Decimal::ZERO),
        _ => None,
    }
}

/// Data-driven insight used when no model prose is available.
pub fn describe(a: &AnalysisInput) -> String {
    let Some(r) = a.result else {
        return format!(
            "The query failed after {} attempts{}. No plot was generated due to errors.",
            a.attempts,
            a.last_error.map(|e| format!(" (last error: {e})")).unwrap_or_default()
        );
    };
    if r.rows.is_empty() {
        return "The query returned no rows. Potential causes: no data matches the filters, \
                required timestamps or JSONB keys are missing, or the query logic excludes every job."
            .to_string();
    }
    let value_col = (1..r.columns.len()).find(|&i| r.rows.iter().all(|row| numeric(&row[i]).is_some()));
    let Some(vi) = value_col else {
        return format!("The query returned {} rows.", r.rows.len());
    };
    let (cat, val) = (&r.columns[0].name, &r.columns[vi].name);
    let pts: Vec<(String, Decimal)> = r
        .rows
        .iter()
        .map(|row| (cell(&row[0]), numeric(&row[vi]).unwrap()))
        .collect();
    if pts.len() == 1 {
        return format!(
            "A single {cat} was returned: {} with {val} {}.",
            pts[0].0,
            fmt_num(&pts[0].1)
        );
    }
    let mut hi = &pts[0];
    let mut lo = &pts[0];
    for p in &pts {
        if p.1 > hi.1 {
            hi = p;
        }
        if p.1 < lo.1 {
            lo = p;
        }
    }
    let total: Decimal = pts.iter().map(|p| p.1).sum();
    // shares only make sense for additive values such as counts and sums
    let additive = pts.iter().all(|p| p.1 >= Decimal::ZERO && p.1.fract().is_zero());
    let share = if total > Decimal::ZERO && additive {
        format!(
            ", {}% of the total across {} groups",
            (hi.1 * Decimal::from(100) / total).round_dp(1).normalize(),
            pts.len()
        )
    } else {
        format!(" across {} groups", pts.len())
    };
    format!(
        "{cat} {} has the highest {val} ({}){share}. The lowest is {} ({}).",
        hi.0,
        fmt_num(&hi.1),
        lo.0,
        fmt_num(&lo.1)
    )
}

fn fallback_recommendations(inputs: &[AnalysisInput]) -> Vec<String> {
    let failed = inputs.iter().filter(|a| a.result.is_none()).count();
    let mut recs = vec![
        "Prioritize the groups with the highest values in the analyses above and review their workflow configuration and scheduling.".to_string(),
        "Add monitoring on creation-to-start and execution durations so queueing delays are caught as they build up.".to_string(),
        "Review error-level log entries for the most affected workflows and fix the recurring failure causes first.".to_string(),
        "Index the columns used for grouping and filtering (workflow_id, lab_id, state, timestamps) and extract frequently read JSONB keys.".to_string(),
        "Re-run this analysis regularly to confirm that changes reduce the observed bottlenecks.".to_string(),
    ];
    if failed > 0 {
        recs[4] = format!(
            "Revisit the {failed} question(s) whose queries failed and confirm the required columns and JSONB keys are populated."
        );
    }
    recs
}

/// Report assembled from the data alone.
pub fn fallback_report(inputs: &[AnalysisInput]) -> ReportDocument {
    let ok = inputs.iter().filter(|a| a.result.is_some()).count();
    ReportDocument {
        introduction: format!(
            "This report reviews operational bottlenecks in the jobs table, which records lab job workflows with their states, \
             timestamps, execution records and logs. {} questions were analyzed; {ok} produced results.",
            inputs.len()
        ),
        analyses: inputs.iter().map(|a| section(a, describe(a))).collect(),
        recommendations: fallback_recommendations(inputs),
        conclusion: if ok == 0 {
            "No query produced results, so no bottleneck could be quantified. Check that the dataset is populated and that the \
             generated queries match the schema."
                .to_string()
        } else {
            "The analyses above show where job counts, durations and errors concentrate. Addressing the largest concentrations first \
             offers the most direct reduction in cycle time."
                .to_string()
        },
        fallback: true,
    }
}

fn section(a: &AnalysisInput, insight: String) -> AnalysisSection {
    AnalysisSection {
        question: a.question.to_string(),
        results_table: match a.result {
            Some(r) => results_table(r),
            None => "(no results)".to_string(),
        },
        insight,
        plot_reference: a.result.and(a.plot_reference).map(str::to_string),
    }
}

fn heading_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?im)^[ \t]*(?:\#{1,6}[ \t]*)?(?:[-*][ \t]*)?(?:\*\*|__)?(?:\d+\.[ \t]*)?(introduction|analysis|recommendations|conclusion)[ \t]*(?:\*\*|__)?[ \t]*(?::[ \t]*(?:\*\*|__)?[ \t]*(.*))?$")
            .unwrap()
    })
}

fn item_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:\d+[.)]|[-*\u{2022}])\s+(.*)$").unwrap())
}

/// Section bodies keyed by heading, or None unless all four appear.
fn segment(raw: &str) -> Option<[String; 4]> {
    const NAMES: [&str; 4] = ["introduction", "analysis", "recommendations", "conclusion"];
    let mut marks: Vec<(usize, usize, usize)> = Vec::new();
    for c in heading_re().captures_iter(raw) {
        let k = NAMES.iter().position(|n| c[1].eq_ignore_ascii_case(n)).unwrap();
        if marks.iter().any(|m| m.0 == k) {
            continue;
        }
        let body_start = c.get(2).map(|m| m.start()).unwrap_or(c.get(0).unwrap().end());
        marks.push((k, c.get(0).unwrap().start(), body_start));
    }
    if marks.len() != 4 {
        return None;
    }
    let mut out: [String; 4] = Default::default();
    for (i, &(k, _, body)) in marks.iter().enumerate() {
        let end = marks.get(i + 1).map(|m| m.1).unwrap_or(raw.len());
        out[k] = raw[body..end].trim().to_string();
    }
    Some(out)
}

fn marker_pos(body: &str, index: usize, question: &str) -> Option<usize> {
    let lower = body.to_lowercase();
    let by_text = lower.find(&strip_hint(question).to_lowercase());
    let re = Regex::new(&format!(r"(?i)\b(?:query|question)\s*#?\s*{index}\b")).unwrap();
    let by_number = re.find(body).map(|m| m.start());
    match (by_text, by_number) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Per-question prose from the analysis section, when every question can
/// be located in order.
fn split_analysis(body: &str, inputs: &[AnalysisInput]) -> Option<Vec<String>> {
    let mut starts = Vec::new();
    for (i, a) in inputs.iter().enumerate() {
        let pos = marker_pos(body, i + 1, a.question)?;
        if starts.last().is_some_and(|&p| pos <= p) {
            return None;
        }
        starts.push(pos);
    }
    let chunks = starts
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let end = starts.get(i + 1).copied().unwrap_or(body.len());
            let chunk = &body[s..end];
            // the first line restates the question, which the document prints itself
            let rest = chunk.split_once('\n').map(|(_, r)| r).unwrap_or("");
            let q = strip_hint(inputs[i].question);
            rest.replace(inputs[i].question, "").replace(q, "").trim().to_string()
        })
        .collect();
    Some(chunks)
}

fn list_items(body: &str) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    let mut in_item = false;
    for line in body.lines() {
        if let Some(c) = item_re().captures(line) {
            items.push(c[1].trim().to_string());
            in_item = true;
        } else if line.trim().is_empty() {
            in_item = false;
        } else if in_item {
            let last = items.last_mut().unwrap();
            last.push(' ');
            last.push_str(line.trim());
        }
    }
    items
}

/// Splits a model response on the Introduction / Analysis /
/// Recommendations / Conclusion headings. Tables always come from the
/// actual results; model prose only fills the narrative.
pub fn parse_report(raw: &str, inputs: &[AnalysisInput]) -> Option<ReportDocument> {
    let [intro, analysis, recs, conclusion] = segment(raw)?;
    if intro.is_empty() || conclusion.is_empty() {
        return None;
    }
    let prose = split_analysis(&analysis, inputs);
    let analyses = inputs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let insight = match &prose {
                Some(p) if !p[i].is_empty() => p[i].clone(),
                _ => describe(a),
            };
            section(a, insight)
        })
        .collect();
    let mut recommendations = list_items(&recs);
    recommendations.truncate(RECOMMENDATION_COUNT);
    for extra in fallback_recommendations(inputs) {
        if recommendations.len() == RECOMMENDATION_COUNT {
            break;
        }
        recommendations.push(extra);
    }
    Some(ReportDocument {
        introduction: intro,
        analyses,
        recommendations,
        conclusion,
        fallback: false,
    })
}

/// Asks the report model for the narrative; gateway failures and
/// unparseable answers give the data-only report.
pub fn build_report(inputs: &[AnalysisInput], gateway: &Gateway, base: &PromptContext) -> ReportDocument {
    let mut ctx = base.clone();
    ctx.queries_results = Some(queries_results_text(inputs));
    match gateway.ask(Role::Report, &ctx) {
        Ok(raw) => parse_report(&raw, inputs).unwrap_or_else(|| {
            tracing::warn!("report response has no recognizable sections; using fallback");
            fallback_report(inputs)
        }),
        Err(e) => {
            tracing::warn!(error = %e, "report model unavailable; using fallback");
            fallback_report(inputs)
        }
    }
}

impl ReportDocument {
    /// Plain-text rendering written to `report.txt`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if self.fallback {
            s.push_str("Note: this narrative was assembled from the query results because the report model response was unavailable.\n\n");
        }
        let _ = write!(s, "Introduction\n\n{}\n\nAnalysis\n\n", self.introduction);
        for (i, a) in self.analyses.iter().enumerate() {
            let _ = writeln!(s, "Query {}: {}", i + 1, a.question);
            let _ = writeln!(s, "Results:\n{}", a.results_table);
            let _ = writeln!(s, "Insights: {}", a.insight);
            match &a.plot_reference {
                Some(p) => {
                    let _ = writeln!(s, "Visualization: {p}");
                }
                None => {
                    let _ = writeln!(s, "Visualization: no plot was generated.");
                }
            }
            s.push('\n');
        }
        s.push_str("Recommendations\n\n");
        for (i, r) in self.recommendations.iter().enumerate() {
            let _ = writeln!(s, "{}. {r}", i + 1);
        }
        let _ = writeln!(s, "\nConclusion\n\n{}", self.conclusion);
        s
    }
}
