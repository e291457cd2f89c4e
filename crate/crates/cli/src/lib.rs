//! `ctra` command-line driver.
//!
//! Exit codes: 0 success (run: at least one question succeeded; lint-sql:
//! query valid), 1 fatal or usage error, 2 run finished but every question
//! failed, 3 lint-sql rejected the query.

pub mod config;

use std::ffi::OsString;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ctra_core::datastore::{generate_synthetic, write_csv, write_jsonl, DatasetFormat, GenerationProfile, TableSchema};
use ctra_core::graph::{run_pipeline, OutcomeStatus, PipelineResult};
use ctra_core::insights::ChartFormat;
use ctra_core::llm::{ChatBackend, Gateway, HttpBackend, RecordingBackend, ReplayBackend, ScriptedBackend};
use ctra_core::sql::{lint_sql, ValidationReport};

use config::{resolve, FileConfig, LlmMode, Overrides, Settings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_ALL_FAILED: i32 = 2;
pub const EXIT_INVALID_SQL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ctra",
    version,
    about = "Lab-operations analytics: questions, SQL, reports and charts"
)]
pub struct Cli {
    /// TOML config file; flags and environment variables take precedence.
    #[arg(long, global = true, env = "CTRA_CONFIG")]
    pub config: Option<PathBuf>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline and write report.txt and charts.
    Run(PipelineArgs),
    /// Write a synthetic jobs corpus.
    GenerateData(GenerateArgs),
    /// Validate one query against the jobs schema; prints a JSON report.
    LintSql(LintArgs),
    /// Run the pipeline and save every model exchange as a replay file.
    ReplayRecord(RecordArgs),
}

fn parse_chart_format(s: &str) -> Result<ChartFormat, String> {
    ChartFormat::parse(s).ok_or_else(|| format!("unknown chart format {s:?} (svg or png)"))
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    #[arg(long, env = "CTRA_DATASET")]
    pub dataset: Option<PathBuf>,
    #[arg(long, env = "CTRA_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
    #[arg(long, env = "CTRA_NUM_QUESTIONS")]
    pub num_questions: Option<usize>,
    #[arg(long, env = "CTRA_MAX_RETRIES")]
    pub max_retries: Option<usize>,
    #[arg(long, value_enum, env = "CTRA_LLM_MODE")]
    pub llm_mode: Option<LlmMode>,
    /// Replay transcript (replay mode) or per-role answer script (scripted mode).
    #[arg(long, env = "CTRA_REPLAY_FILE")]
    pub replay_file: Option<PathBuf>,
    /// OpenAI-compatible base URL for live mode.
    #[arg(long, env = "CTRA_ENDPOINT")]
    pub endpoint: Option<String>,
    #[arg(long, value_parser = parse_chart_format, env = "CTRA_CHART_FORMAT")]
    pub chart_format: Option<ChartFormat>,
    /// Skip the model code check after the deterministic lint.
    #[arg(long)]
    pub no_code_check: bool,
    /// Ask the chart model for chart specs before the rule-based ones.
    #[arg(long)]
    pub llm_charts: bool,
}

impl PipelineArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            dataset: self.dataset.clone(),
            output_dir: self.output_dir.clone(),
            num_questions: self.num_questions,
            max_retries: self.max_retries,
            llm_mode: self.llm_mode,
            replay_file: self.replay_file.clone(),
            endpoint: self.endpoint.clone(),
            chart_format: self.chart_format,
            no_code_check: self.no_code_check,
            llm_charts: self.llm_charts,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RecordArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Where to write the recorded replay file.
    #[arg(long)]
    pub record_to: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 1, env = "CTRA_SEED")]
    pub seed: u64,
    /// Number of records; defaults to the profile's count.
    #[arg(long)]
    pub count: Option<usize>,
    /// Output path; `.csv` writes CSV, anything else JSON lines.
    #[arg(long, default_value = "data/jobs.jsonl")]
    pub output: PathBuf,
    /// TOML generation profile.
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LintArgs {
    /// Query text; read from stdin when omitted.
    #[arg(long)]
    pub sql: Option<String>,
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FATAL } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FATAL
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    let _ = tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .with_target(false)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .try_init();
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match &cli.command {
        Command::Run(args) => cmd_run(&resolve(&args.overrides(), &file)?),
        Command::ReplayRecord(args) => cmd_replay_record(&resolve(&args.pipeline.overrides(), &file)?, &args.record_to),
        Command::GenerateData(args) => cmd_generate_data(args),
        Command::LintSql(args) => cmd_lint_sql(args),
    }
}

fn backend_for(settings: &Settings) -> Result<Box<dyn ChatBackend>> {
    let file = settings.replay_file.as_deref();
    Ok(match settings.llm_mode {
        LlmMode::Live => Box::new(HttpBackend::from_env()?),
        LlmMode::Replay => Box::new(ReplayBackend::from_path(file.expect("checked in resolve"))?),
        LlmMode::Scripted => Box::new(ScriptedBackend::from_path(file.expect("checked in resolve"))?),
    })
}

fn summarize(result: &PipelineResult) -> i32 {
    for o in &result.outcomes {
        let status = match o.status {
            OutcomeStatus::Succeeded => "succeeded",
            OutcomeStatus::Failed => "failed",
        };
        let rows = o.result.as_ref().map(|r| r.rows.len()).unwrap_or(0);
        println!(
            "question {}: {status} (attempts {}, rows {rows}) {}",
            o.question.index + 1,
            o.attempts,
            o.question.text
        );
    }
    println!("report: {}", result.report_file.display());
    for f in &result.chart_files {
        println!("chart: {}", f.display());
    }
    if result.report.fallback {
        eprintln!("warning: report narrative assembled without the report model");
    }
    if result.succeeded() > 0 {
        EXIT_OK
    } else {
        EXIT_ALL_FAILED
    }
}

pub fn cmd_run(settings: &Settings) -> Result<i32> {
    let gateway = Gateway::new(backend_for(settings)?, settings.pipeline.role_configs.clone());
    let result = run_pipeline(&settings.pipeline, &gateway)?;
    Ok(summarize(&result))
}

/// Runs the pipeline through a recording backend. Source is live or
/// scripted mode; replaying a replay file would only copy it.
pub fn cmd_replay_record(settings: &Settings, record_to: &Path) -> Result<i32> {
    if settings.llm_mode == LlmMode::Replay {
        anyhow::bail!("replay-record needs --llm-mode live or scripted");
    }
    let recorder = Arc::new(RecordingBackend::new(backend_for(settings)?));
    let gateway = Gateway::new(Box::new(recorder.clone()), settings.pipeline.role_configs.clone());
    let outcome = run_pipeline(&settings.pipeline, &gateway);
    recorder
        .write(record_to)
        .with_context(|| format!("cannot write {}", record_to.display()))?;
    println!(
        "recorded {} exchanges to {}",
        recorder.entries().len(),
        record_to.display()
    );
    Ok(summarize(&outcome?))
}

pub fn cmd_generate_data(args: &GenerateArgs) -> Result<i32> {
    let mut profile = match &args.profile {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            GenerationProfile::from_toml(&text)?
        }
        None => GenerationProfile::default(),
    };
    if let Some(n) = args.count {
        profile = profile.with_record_count(n);
    }
    let records = generate_synthetic(args.seed, &profile)?;
    if let Some(dir) = args.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let file =
        std::fs::File::create(&args.output).with_context(|| format!("cannot create {}", args.output.display()))?;
    let writer = std::io::BufWriter::new(file);
    match DatasetFormat::from_path(&args.output) {
        DatasetFormat::Csv => write_csv(&records, writer)?,
        DatasetFormat::Jsonl => write_jsonl(&records, writer)?,
    }
    println!("wrote {} records to {}", records.len(), args.output.display());
    Ok(EXIT_OK)
}

pub fn lint_report(sql: &str) -> ValidationReport {
    let (_, findings) = lint_sql(sql, &TableSchema::jobs());
    ValidationReport::from_findings(&findings)
}

pub fn cmd_lint_sql(args: &LintArgs) -> Result<i32> {
    let sql = match &args.sql {
        Some(s) => s.clone(),
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).context("cannot read stdin")?;
            s
        }
    };
    let report = lint_report(&sql);
    println!("{}", report.to_json());
    Ok(if report.is_valid { EXIT_OK } else { EXIT_INVALID_SQL })
}
