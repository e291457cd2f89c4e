use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use ctra_core::graph::PipelineConfig;
use ctra_core::insights::ChartFormat;
use ctra_core::llm::Role;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmMode {
    Live,
    Replay,
    Scripted,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleOverride {
    pub model_name: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub endpoint: Option<String>,
    pub timeout_secs: Option<f64>,
}

/// Flat TOML config file; every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub num_questions: Option<usize>,
    pub max_retries: Option<usize>,
    pub llm_mode: Option<LlmMode>,
    pub replay_file: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub chart_format: Option<ChartFormat>,
    pub code_check: Option<bool>,
    pub llm_charts: Option<bool>,
    #[serde(default)]
    pub roles: BTreeMap<String, RoleOverride>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Values given on the command line or through the environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub num_questions: Option<usize>,
    pub max_retries: Option<usize>,
    pub llm_mode: Option<LlmMode>,
    pub replay_file: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub chart_format: Option<ChartFormat>,
    pub no_code_check: bool,
    pub llm_charts: bool,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub pipeline: PipelineConfig,
    pub llm_mode: LlmMode,
    pub replay_file: Option<PathBuf>,
}

/// Flags and environment first, then the config file, then defaults.
pub fn resolve(cli: &Overrides, file: &FileConfig) -> Result<Settings> {
    let mut p = PipelineConfig::default();
    if let Some(v) = cli.dataset.clone().or(file.dataset.clone()) {
        p.dataset_path = v;
    }
    if let Some(v) = cli.output_dir.clone().or(file.output_dir.clone()) {
        p.output_dir = v;
    }
    if let Some(v) = cli.num_questions.or(file.num_questions) {
        p.num_questions = v;
    }
    if let Some(v) = cli.max_retries.or(file.max_retries) {
        p.max_retries = v;
    }
    if let Some(v) = cli.chart_format.or(file.chart_format) {
        p.chart_format = v;
    }
    p.code_check = !cli.no_code_check && file.code_check.unwrap_or(true);
    p.llm_charts = cli.llm_charts || file.llm_charts.unwrap_or(false);
    if p.num_questions == 0 {
        bail!("num_questions must be at least 1");
    }

    let endpoint = cli.endpoint.clone().or(file.endpoint.clone());
    for (name, o) in &file.roles {
        let role = Role::parse(name).with_context(|| format!("unknown role {name:?} in config"))?;
        let c = p.role_configs.get_mut(&role).expect("all roles have defaults");
        if let Some(v) = &o.model_name {
            c.model_name = v.clone();
        }
        if let Some(v) = o.temperature {
            c.temperature = v;
        }
        if let Some(v) = o.max_tokens {
            c.max_tokens = v;
        }
        if let Some(v) = &o.endpoint {
            c.endpoint = v.clone();
        }
        if let Some(v) = o.timeout_secs {
            c.timeout = Duration::try_from_secs_f64(v).context("invalid timeout_secs")?;
        }
    }
    if let Some(e) = &endpoint {
        for (role, c) in p.role_configs.iter_mut() {
            let per_role = file.roles.get(role.as_str()).and_then(|o| o.endpoint.as_ref());
            if cli.endpoint.is_some() || per_role.is_none() {
                c.endpoint = e.clone();
            }
        }
    }

    let llm_mode = cli.llm_mode.or(file.llm_mode).unwrap_or(LlmMode::Replay);
    let replay_file = cli.replay_file.clone().or(file.replay_file.clone());
    match llm_mode {
        LlmMode::Replay | LlmMode::Scripted if replay_file.is_none() => {
            bail!("llm mode {llm_mode:?} needs --replay-file")
        }
        LlmMode::Live if endpoint.is_none() && file.roles.values().all(|o| o.endpoint.is_none()) => {
            bail!("llm mode live needs --endpoint")
        }
        _ => {}
    }
    Ok(Settings {
        pipeline: p,
        llm_mode,
        replay_file,
    })
}
