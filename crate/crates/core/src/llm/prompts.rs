use std::sync::OnceLock;

use regex::{Captures, Regex};

use super::{LlmError, Role};

const GENERATE_QUESTIONS: &str = include_str!("../../assets/prompts/generate_questions.txt");
const GENERATE_SQL: &str = include_str!("../../assets/prompts/generate_sql.txt");
const CODE_CHECK: &str = include_str!("../../assets/prompts/code_check.txt");
const REFLECT: &str = include_str!("../../assets/prompts/reflect.txt");
const REPORT: &str = include_str!("../../assets/prompts/report.txt");
const CHART: &str = include_str!("../../assets/prompts/chart.txt");

pub fn template(role: Role) -> &'static str {
    match role {
        Role::QuestionCreation => GENERATE_QUESTIONS,
        Role::QueryBuilder => GENERATE_SQL,
        Role::CodeCheck => CODE_CHECK,
        Role::Reflect => REFLECT,
        Role::Report => REPORT,
        Role::Chart => CHART,
    }
}

/// Values for template placeholders. Optional fields are only required by
/// the templates that mention them.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptContext {
    pub table_schema: String,
    pub num_questions: usize,
    pub question: Option<String>,
    pub code: Option<String>,
    pub errors: Option<String>,
    pub queries_results: Option<String>,
    pub output_dir: String,
    pub data: Option<String>,
    pub plot_filename: Option<String>,
    /// Extension written into plot references of the report prompt.
    pub plot_extension: String,
}

impl PromptContext {
    pub fn new(table_schema: impl Into<String>, output_dir: impl Into<String>) -> Self {
        PromptContext {
            table_schema: table_schema.into(),
            num_questions: 5,
            question: None,
            code: None,
            errors: None,
            queries_results: None,
            output_dir: output_dir.into(),
            data: None,
            plot_filename: None,
            plot_extension: "png".to_string(),
        }
    }

    fn lookup(&self, name: &str) -> Option<Result<String, &'static str>> {
        let opt = |v: &Option<String>, n: &'static str| v.clone().ok_or(n);
        Some(match name {
            "table_schema" => Ok(self.table_schema.clone()),
            "num_questions" => Ok(self.num_questions.to_string()),
            "output_dir" => Ok(self.output_dir.clone()),
            "question" => opt(&self.question, "question"),
            "code" => opt(&self.code, "code"),
            "errors" => opt(&self.errors, "errors"),
            "queries_results" => opt(&self.queries_results, "queries_results"),
            "data" => opt(&self.data, "data"),
            "plot_filename" => opt(&self.plot_filename, "plot_filename"),
            _ => return None,
        })
    }
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_]+)\}").unwrap())
}

fn plot_ref_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(plot_query_[A-Za-z0-9]+)\.png").unwrap())
}

/// Substitutes known placeholders in a single pass, so values that happen
/// to contain `{name}` are never expanded again. Unknown brace groups are
/// left alone.
pub fn render_prompt(role: Role, ctx: &PromptContext) -> Result<String, LlmError> {
    let mut missing = None;
    let out = placeholder_re().replace_all(template(role), |caps: &Captures| match ctx.lookup(&caps[1]) {
        Some(Ok(v)) => v,
        Some(Err(name)) => {
            missing.get_or_insert(name);
            String::new()
        }
        None => caps[0].to_string(),
    });
    if let Some(name) = missing {
        return Err(LlmError::MissingPlaceholder { role, name });
    }
    if role == Role::Report && ctx.plot_extension != "png" {
        let ext = format!("$1.{}", ctx.plot_extension);
        return Ok(plot_ref_re().replace_all(&out, ext.as_str()).into_owned());
    }
    Ok(out.into_owned())
}
