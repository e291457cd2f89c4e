//! The orchestrator: question creation, then per question build, validate
//! and (on failure) reflect and rebuild up to `max_retries` times, then the
//! report and the charts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::datastore::{load_dataset, DatasetError, DatasetFormat, InMemoryBackend, QueryBackend, TableSchema};
use crate::engine::ResultSet;
use crate::insights::{
    build_report, render_chart, spec_from_result, AnalysisInput, ChartFormat, ChartHint, ChartSpec, ReportDocument,
};
use crate::llm::{
    default_role_configs, extract_json_array, extract_json_object, extract_sql, render_prompt, Gateway, LlmError,
    PromptContext, Role, RoleModelConfig,
};
use crate::sql::{lint_sql, ValidationReport};

pub const DEFAULT_NUM_QUESTIONS: usize = 5;
pub const DEFAULT_MAX_RETRIES: usize = 3;
pub const REPORT_FILE: &str = "report.txt";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Question {
    pub text: String,
    pub chart_hint: ChartHint,
    pub index: usize,
}

impl Question {
    pub fn new(index: usize, text: impl Into<String>) -> Self {
        let text = text.into();
        Question {
            chart_hint: ChartHint::parse_suffix(&text),
            text,
            index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionOutcome {
    pub question: Question,
    pub final_sql: Option<String>,
    pub result: Option<ResultSet>,
    pub status: OutcomeStatus,
    pub attempts: usize,
    pub error_trail: Vec<String>,
    pub reflection_notes: Vec<String>,
    /// Remarks from the model code check; advisory only.
    pub code_check_notes: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct AgentState {
    pub schema_text: String,
    pub questions: Vec<Question>,
    pub cursor: usize,
    pub current_sql: Option<String>,
    pub current_errors: Vec<String>,
    /// Deterministic fixes for `current_errors`, used when reflection fails.
    pub current_suggestions: Vec<String>,
    pub retry_count: usize,
    pub outcomes: Vec<QuestionOutcome>,
    pub report: Option<ReportDocument>,
    pub charts: Vec<ChartSpec>,
    pub node_executions: usize,
    attempt: Attempt,
}

impl AgentState {
    pub fn new(schema_text: impl Into<String>, questions: Vec<Question>) -> Self {
        AgentState {
            schema_text: schema_text.into(),
            questions,
            ..AgentState::default()
        }
    }
}

/// Bookkeeping for the question under the cursor.
#[derive(Debug, Clone, Default)]
struct Attempt {
    count: usize,
    error_trail: Vec<String>,
    reflection_notes: Vec<String>,
    code_check_notes: Vec<String>,
    result: Option<ResultSet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationRoute {
    Ok,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetryRoute {
    Retry,
    GiveUp,
    Proceed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavigatorRoute {
    NextQuestion,
    Summarize,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub num_questions: usize,
    pub max_retries: usize,
    pub output_dir: PathBuf,
    pub role_configs: BTreeMap<Role, RoleModelConfig>,
    pub dataset_path: PathBuf,
    pub chart_format: ChartFormat,
    /// Ask the code-check model after the deterministic lint passes.
    pub code_check: bool,
    /// Ask the chart model for a ChartSpec before the rule-based one.
    pub llm_charts: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            num_questions: DEFAULT_NUM_QUESTIONS,
            max_retries: DEFAULT_MAX_RETRIES,
            output_dir: PathBuf::from("out"),
            role_configs: default_role_configs(),
            dataset_path: PathBuf::from("data/jobs.jsonl"),
            chart_format: ChartFormat::Svg,
            code_check: true,
            llm_charts: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.num_questions == 0 {
            return Err(PipelineError::Config("num_questions must be at least 1".into()));
        }
        Ok(())
    }

    fn plot_reference(&self, index: usize) -> String {
        format!(
            "{}/plot_query_{}.{}",
            self.output_dir.display(),
            index + 1,
            self.chart_format.extension()
        )
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("question creation failed: {0}")]
    QuestionCreation(LlmError),
    #[error("question creation returned no questions")]
    NoQuestions,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineResult {
    pub report: ReportDocument,
    pub charts: Vec<ChartSpec>,
    pub chart_files: Vec<PathBuf>,
    pub report_file: PathBuf,
    pub outcomes: Vec<QuestionOutcome>,
    pub node_executions: usize,
}

impl PipelineResult {
    pub fn succeeded(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| o.status == OutcomeStatus::Succeeded)
            .count()
    }
}

fn base_context(state: &AgentState, config: &PipelineConfig) -> PromptContext {
    let mut ctx = PromptContext::new(state.schema_text.clone(), config.output_dir.display().to_string());
    ctx.num_questions = config.num_questions;
    ctx.plot_extension = config.chart_format.extension().to_string();
    ctx
}

pub fn node_question_creation(
    state: &mut AgentState,
    gateway: &Gateway,
    config: &PipelineConfig,
) -> Result<(), PipelineError> {
    assert!(state.questions.is_empty(), "questions already created");
    state.node_executions += 1;
    let raw = gateway
        .ask(Role::QuestionCreation, &base_context(state, config))
        .map_err(PipelineError::QuestionCreation)?;
    let mut texts = extract_json_array(&raw).map_err(PipelineError::QuestionCreation)?;
    texts.retain(|t| !t.trim().is_empty());
    if texts.is_empty() {
        return Err(PipelineError::NoQuestions);
    }
    if texts.len() > config.num_questions {
        tracing::warn!(
            got = texts.len(),
            want = config.num_questions,
            "extra questions dropped"
        );
        texts.truncate(config.num_questions);
    }
    state.questions = texts
        .into_iter()
        .enumerate()
        .map(|(i, t)| Question::new(i, t.trim()))
        .collect();
    state.cursor = 0;
    Ok(())
}

/// Guidance for a failed attempt. Falls back to the deterministic
/// suggestions (or the errors themselves) when the model is unavailable.
pub fn node_reflect(state: &AgentState, gateway: &Gateway, config: &PipelineConfig) -> String {
    assert!(!state.current_errors.is_empty(), "reflect needs errors");
    let mut ctx = base_context(state, config);
    ctx.code = Some(
        state
            .current_sql
            .clone()
            .unwrap_or_else(|| "(no query was produced)".into()),
    );
    ctx.errors = Some(state.current_errors.join("\n"));
    match gateway.ask(Role::Reflect, &ctx) {
        Ok(text) if !text.trim().is_empty() => strip_reasoning(&text),
        Ok(_) | Err(_) => {
            let fallback = if state.current_suggestions.is_empty() {
                &state.current_errors
            } else {
                &state.current_suggestions
            };
            fallback.join("\n")
        }
    }
}

fn strip_reasoning(text: &str) -> String {
    match text.rfind("</think>") {
        Some(i) => text[i + "</think>".len()..].trim().to_string(),
        None => text.trim().to_string(),
    }
}

fn retry_prompt(base: String, sql: Option<&str>, errors: &[String], guidance: &str) -> String {
    format!(
        "{base}\n\nThe previous query failed.\nPrevious query:\n{}\nErrors:\n{}\nGuidance:\n{guidance}\nReturn a corrected query.",
        sql.unwrap_or("(none)"),
        errors.join("\n"),
    )
}

pub fn node_query_builder(state: &mut AgentState, gateway: &Gateway, config: &PipelineConfig) {
    assert!(
        state.cursor < state.questions.len(),
        "builder called past the last question"
    );
    state.node_executions += 1;
    let mut ctx = base_context(state, config);
    ctx.question = Some(state.questions[state.cursor].text.clone());
    let mut prompt = render_prompt(Role::QueryBuilder, &ctx).expect("builder context is complete");
    if state.retry_count > 0 {
        let guidance = node_reflect(state, gateway, config);
        prompt = retry_prompt(prompt, state.current_sql.as_deref(), &state.current_errors, &guidance);
        state.attempt.reflection_notes.push(guidance);
    }
    state.attempt.count += 1;
    state.current_errors.clear();
    state.current_suggestions.clear();
    match gateway
        .complete(Role::QueryBuilder, &prompt)
        .and_then(|raw| extract_sql(&raw))
    {
        Ok(sql) => state.current_sql = Some(sql),
        Err(e) => {
            state.current_sql = None;
            state.current_errors.push(format!("query generation failed: {e}"));
        }
    }
}

pub fn node_query_validator(
    state: &mut AgentState,
    backend: &dyn QueryBackend,
    gateway: &Gateway,
    config: &PipelineConfig,
) -> ValidationRoute {
    state.node_executions += 1;
    let route = validate_current(state, backend, gateway, config);
    if route == ValidationRoute::Error {
        let n = state.attempt.count;
        for e in &state.current_errors {
            state.attempt.error_trail.push(format!("attempt {n}: {e}"));
        }
    }
    route
}

fn validate_current(
    state: &mut AgentState,
    backend: &dyn QueryBackend,
    gateway: &Gateway,
    config: &PipelineConfig,
) -> ValidationRoute {
    let Some(sql) = state.current_sql.clone() else {
        return ValidationRoute::Error;
    };
    let (ast, findings) = lint_sql(&sql, &TableSchema::jobs());
    if !findings.is_empty() {
        let report = ValidationReport::from_findings(&findings);
        state.current_errors = report.errors;
        state.current_suggestions = report.suggestions;
        return ValidationRoute::Error;
    }
    let ast = ast.expect("lint-clean SQL parsed");
    if config.code_check {
        let mut ctx = base_context(state, config);
        ctx.code = Some(sql);
        ctx.question = Some(state.questions[state.cursor].text.clone());
        match gateway
            .ask(Role::CodeCheck, &ctx)
            .and_then(|raw| extract_json_object(&raw))
        {
            Ok(r) => {
                let notes = r.errors.into_iter().chain(r.suggestions);
                state.attempt.code_check_notes.extend(notes);
            }
            Err(e) => tracing::debug!(error = %e, "code check skipped"),
        }
    }
    match backend.execute(&ast) {
        Ok(rs) => {
            state.attempt.result = Some(rs);
            ValidationRoute::Ok
        }
        Err(e) => {
            state.current_errors = vec![e.message];
            ValidationRoute::Error
        }
    }
}

/// Records the outcome when the question is finished (proceed or give up).
pub fn route_after_validation(state: &mut AgentState, route: ValidationRoute, max_retries: usize) -> RetryRoute {
    let next = match route {
        ValidationRoute::Ok => RetryRoute::Proceed,
        ValidationRoute::Error if state.retry_count < max_retries => {
            state.retry_count += 1;
            return RetryRoute::Retry;
        }
        ValidationRoute::Error => RetryRoute::GiveUp,
    };
    let attempt = std::mem::take(&mut state.attempt);
    let succeeded = next == RetryRoute::Proceed;
    state.outcomes.push(QuestionOutcome {
        question: state.questions[state.cursor].clone(),
        final_sql: if succeeded { state.current_sql.clone() } else { None },
        status: if succeeded {
            OutcomeStatus::Succeeded
        } else {
            OutcomeStatus::Failed
        },
        result: attempt.result,
        attempts: attempt.count,
        error_trail: attempt.error_trail,
        reflection_notes: attempt.reflection_notes,
        code_check_notes: attempt.code_check_notes,
    });
    next
}

pub fn node_question_navigator(state: &mut AgentState) -> NavigatorRoute {
    state.node_executions += 1;
    debug_assert_eq!(state.outcomes.len(), state.cursor + 1);
    state.current_sql = None;
    state.current_errors.clear();
    state.current_suggestions.clear();
    state.retry_count = 0;
    state.attempt = Attempt::default();
    state.cursor += 1;
    if state.cursor < state.questions.len() {
        NavigatorRoute::NextQuestion
    } else {
        NavigatorRoute::Summarize
    }
}

/// Questions that get a chart: succeeded ones with a chart hint.
fn charted(o: &QuestionOutcome) -> bool {
    o.status == OutcomeStatus::Succeeded && o.question.chart_hint != ChartHint::None
}

pub fn node_summarize(state: &mut AgentState, gateway: &Gateway, config: &PipelineConfig) {
    state.node_executions += 1;
    let refs: Vec<Option<String>> = state
        .outcomes
        .iter()
        .map(|o| charted(o).then(|| config.plot_reference(o.question.index)))
        .collect();
    let inputs: Vec<AnalysisInput> = state
        .outcomes
        .iter()
        .zip(&refs)
        .map(|(o, r)| AnalysisInput {
            question: &o.question.text,
            sql: o.final_sql.as_deref(),
            result: o.result.as_ref(),
            attempts: o.attempts,
            last_error: o.error_trail.last().map(String::as_str),
            plot_reference: r.as_deref(),
        })
        .collect();
    let report = build_report(&inputs, gateway, &base_context(state, config));
    state.report = Some(report);
}

fn chart_from_model(
    gateway: &Gateway,
    state: &AgentState,
    config: &PipelineConfig,
    o: &QuestionOutcome,
    filename: &str,
) -> Option<ChartSpec> {
    let rs = o.result.as_ref()?;
    let rows: Vec<serde_json::Value> = rs
        .rows
        .iter()
        .map(|r| {
            let obj = rs
                .columns
                .iter()
                .zip(r)
                .map(|(c, v)| (c.name.clone(), serde_json::to_value(v).unwrap()));
            serde_json::Value::Object(obj.collect())
        })
        .collect();
    let mut ctx = base_context(state, config);
    ctx.data = Some(serde_json::Value::Array(rows).to_string());
    ctx.plot_filename = Some(filename.to_string());
    let raw = gateway.ask(Role::Chart, &ctx).ok()?;
    let start = raw.find('{')?;
    let end = raw.rfind('}')?;
    let mut spec: ChartSpec = serde_json::from_str(raw.get(start..=end)?).ok()?;
    spec.filename = filename.to_string();
    spec.check().ok()?;
    Some(spec)
}

pub fn node_charting(
    state: &mut AgentState,
    gateway: &Gateway,
    config: &PipelineConfig,
) -> Result<Vec<PathBuf>, PipelineError> {
    state.node_executions += 1;
    let mut files = Vec::new();
    let mut specs = Vec::new();
    for o in state.outcomes.iter().filter(|o| charted(o)) {
        let filename = format!(
            "plot_query_{}.{}",
            o.question.index + 1,
            config.chart_format.extension()
        );
        let rs = o.result.as_ref().expect("succeeded outcome has a result");
        let spec = config
            .llm_charts
            .then(|| chart_from_model(gateway, state, config, o, &filename))
            .flatten()
            .unwrap_or_else(|| spec_from_result(&o.question.text, o.question.chart_hint, rs, &filename));
        let path = config.output_dir.join(&filename);
        render_chart(&spec, &path, config.chart_format).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })?;
        files.push(path);
        specs.push(spec);
    }
    state.charts = specs;
    Ok(files)
}

/// Runs the graph over an already loaded backend.
pub fn run_with_backend(
    config: &PipelineConfig,
    gateway: &Gateway,
    backend: &dyn QueryBackend,
) -> Result<PipelineResult, PipelineError> {
    config.validate()?;
    let mut state = AgentState::new(TableSchema::jobs().to_prompt_text(), Vec::new());
    node_question_creation(&mut state, gateway, config)?;
    loop {
        node_query_builder(&mut state, gateway, config);
        let route = node_query_validator(&mut state, backend, gateway, config);
        match route_after_validation(&mut state, route, config.max_retries) {
            RetryRoute::Retry => continue,
            RetryRoute::Proceed | RetryRoute::GiveUp => {}
        }
        let o = state.outcomes.last().unwrap();
        tracing::info!(question = o.question.index + 1, status = ?o.status, attempts = o.attempts, "question done");
        if node_question_navigator(&mut state) == NavigatorRoute::Summarize {
            break;
        }
    }
    node_summarize(&mut state, gateway, config);

    let dir = &config.output_dir;
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| PipelineError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let report = state.report.clone().expect("summarized");
    let report_file = dir.join(REPORT_FILE);
    std::fs::write(&report_file, report.to_text()).map_err(io_err(&report_file))?;
    let chart_files = node_charting(&mut state, gateway, config)?;

    Ok(PipelineResult {
        report,
        charts: state.charts,
        chart_files,
        report_file,
        outcomes: state.outcomes,
        node_executions: state.node_executions,
    })
}

/// Loads the dataset named in the config and runs the graph.
pub fn run_pipeline(config: &PipelineConfig, gateway: &Gateway) -> Result<PipelineResult, PipelineError> {
    let format = DatasetFormat::from_path(&config.dataset_path);
    let records = load_dataset(&config.dataset_path, format)?;
    run_with_backend(config, gateway, &InMemoryBackend::new(records))
}
