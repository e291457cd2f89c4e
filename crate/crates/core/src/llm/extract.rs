use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use super::LlmError;
use crate::sql::ValidationReport;

/// Yields every JSON value that parses starting at an `open` bracket,
/// skipping past each parsed value so nested brackets are not revisited.
fn json_candidates(raw: &str, open: u8) -> Vec<Value> {
    let bytes = raw.as_bytes();
    let mut found = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != open {
            i += 1;
            continue;
        }
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(v)) => {
                i += stream.byte_offset();
                found.push(v);
            }
            _ => i += 1,
        }
    }
    found
}

fn string_list(v: &Value) -> Option<Vec<String>> {
    v.as_array()?.iter().map(|x| x.as_str().map(str::to_string)).collect()
}

/// First well-formed JSON array of strings in `raw`, tolerating prose and
/// code fences around it.
pub fn extract_json_array(raw: &str) -> Result<Vec<String>, LlmError> {
    let candidates = json_candidates(&strip_reasoning(raw), b'[');
    if candidates.is_empty() {
        return Err(LlmError::NoJsonFound("array"));
    }
    candidates
        .iter()
        .find_map(string_list)
        .ok_or_else(|| LlmError::WrongShape("expected an array of strings".into()))
}

fn report_from(v: &Value) -> Result<ValidationReport, String> {
    let obj = v.as_object().ok_or("expected an object")?;
    let is_valid = obj
        .get("is_valid")
        .ok_or("missing key is_valid")?
        .as_bool()
        .ok_or("is_valid must be a boolean")?;
    let list = |key: &str| -> Result<Vec<String>, String> {
        let v = obj.get(key).ok_or(format!("missing key {key}"))?;
        string_list(v).ok_or(format!("{key} must be a list of strings"))
    };
    Ok(ValidationReport {
        is_valid,
        errors: list("errors")?,
        suggestions: list("suggestions")?,
    })
}

/// First JSON object in `raw` with the code-check keys `is_valid`,
/// `errors` and `suggestions`.
pub fn extract_json_object(raw: &str) -> Result<ValidationReport, LlmError> {
    let candidates = json_candidates(&strip_reasoning(raw), b'{');
    let mut first_err = None;
    for c in &candidates {
        match report_from(c) {
            Ok(r) => return Ok(r),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(LlmError::WrongShape(e)),
        None => Err(LlmError::NoJsonFound("object")),
    }
}

fn fence_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```[A-Za-z]*[ \t]*\n?(.*?)(?:```|$)").unwrap())
}

fn select_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // statement start: beginning of a line, or after a colon or backtick
    RE.get_or_init(|| Regex::new(r"(?im)(?:^|[:`])[ \t]*(select\b|with[ \t]+\w+[ \t]+as[ \t]*\()").unwrap())
}

fn from_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bfrom\b").unwrap())
}

fn statement_at(text: &str, start: usize) -> String {
    let rest = &text[start..];
    let end = rest.find([';', '`']).unwrap_or(rest.len());
    let lines: Vec<&str> = rest[..end]
        .lines()
        .map(str::trim_end)
        .filter(|l| !l.trim().is_empty())
        .collect();
    lines.join("\n")
}

/// Prefers a candidate with a FROM clause so a prose line such as
/// "Select the busiest lab:" does not win over the query below it.
fn first_select(text: &str) -> Option<String> {
    let starts: Vec<usize> = select_re()
        .captures_iter(text)
        .map(|c| c.get(1).unwrap().start())
        .collect();
    let has_from = |i: usize| {
        let end = starts.get(i + 1).copied().unwrap_or(text.len());
        from_re().is_match(&statement_at(&text[..end], starts[i]))
    };
    let pick = (0..starts.len()).find(|&i| has_from(i)).or(starts.first().map(|_| 0))?;
    Some(statement_at(text, starts[pick]))
}

fn think_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)<think>.*?(?:</think>|$)").unwrap())
}

/// Reasoning models prefix answers with a `<think>` block that often
/// contains draft JSON or SQL.
fn strip_reasoning(raw: &str) -> std::borrow::Cow<'_, str> {
    think_re().replace_all(raw, "")
}

/// First SELECT statement in `raw`: fenced blocks are searched first, the
/// trailing semicolon is dropped and blank lines are removed. A leading
/// `WITH name AS (` is kept so the lint can report the CTE.
pub fn extract_sql(raw: &str) -> Result<String, LlmError> {
    let raw = strip_reasoning(raw);
    fence_re()
        .captures_iter(&raw)
        .find_map(|c| first_select(&c[1]))
        .or_else(|| first_select(&raw))
        .ok_or(LlmError::NoSelectFound)
}
