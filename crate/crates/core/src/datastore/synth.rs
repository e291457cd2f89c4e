//! Seeded synthetic `jobs` corpus.
//!
//! The default profile reproduces one month of lab operations: 5,031 jobs,
//! per-state mean creation-to-start delays pinned to fixed targets, and a
//! single workflow that carries almost all ERROR-level log entries.
//!
//! Per-state delays are drawn log-normally and then rescaled so that the
//! sample mean over started jobs equals the target to the microsecond. Each
//! job's `outputs.error_log_count` mirrors the number of ERROR entries in its
//! `logs` array so the concentration is queryable with depth-1 JSONB access.

use chrono::{Duration, FixedOffset, TimeZone};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, WeightedIndex};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::record::{format_timestamp, parse_timestamp, JobRecord, JobState, Timestamp};
use super::{DatasetError, JsonValue};

const MICROS_PER_SEC: f64 = 1_000_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateProfile {
    pub state: String,
    /// Relative share of jobs; counts are apportioned by largest remainder.
    pub weight: f64,
    /// Probability that a job in this state has a started_timestamp.
    pub started_fraction: f64,
    /// Target mean of EXTRACT(EPOCH FROM started - created) over started jobs.
    pub mean_start_delay_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorProfile {
    /// ERROR-level log entries attached to the hot workflow.
    pub hot_entries: u64,
    pub cold_min: u64,
    pub cold_max: u64,
    /// Lower bound on hot / (hot + all cold); cold totals shrink to meet it.
    pub min_hot_share: f64,
}

impl Default for ErrorProfile {
    fn default() -> Self {
        ErrorProfile {
            hot_entries: 41_870,
            cold_min: 10,
            cold_max: 330,
            min_hot_share: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationProfile {
    pub record_count: usize,
    /// RFC 3339 start of the creation window.
    pub start: String,
    pub span_days: u32,
    pub labs: usize,
    pub workflows: usize,
    /// Fraction of jobs that belong to the hot workflow.
    pub hot_workflow_job_share: f64,
    pub delay_sigma: f64,
    pub execution_median_secs: f64,
    pub execution_sigma: f64,
    pub states: Vec<StateProfile>,
    pub errors: ErrorProfile,
}

impl Default for GenerationProfile {
    fn default() -> Self {
        let state = |state: JobState, weight: f64, started: f64, mean: f64| StateProfile {
            state: state.as_str().to_string(),
            weight,
            started_fraction: started,
            mean_start_delay_secs: mean,
        };
        GenerationProfile {
            record_count: 5_031,
            start: "2024-03-01T00:00:00+00:00".to_string(),
            span_days: 30,
            labs: 4,
            workflows: 15,
            hot_workflow_job_share: 0.14,
            delay_sigma: 1.1,
            execution_median_secs: 2_400.0,
            execution_sigma: 1.3,
            states: vec![
                state(JobState::Completed, 3_600.0, 0.985, 8_693.34),
                state(JobState::InError, 520.0, 0.93, 41.50),
                state(JobState::Cancelled, 380.0, 0.55, 3_398.24),
                state(JobState::Running, 210.0, 1.0, 3_486.02),
                state(JobState::Paused, 96.0, 1.0, 33.13),
                state(JobState::Unscheduled, 225.0, 0.12, 5_991.09),
            ],
            errors: ErrorProfile::default(),
        }
    }
}

impl GenerationProfile {
    pub fn from_toml(text: &str) -> Result<Self, DatasetError> {
        let profile: GenerationProfile =
            toml::from_str(text).map_err(|e| DatasetError::InvalidProfile(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }

    /// Same profile at a different size; error volumes scale proportionally.
    pub fn with_record_count(&self, count: usize) -> Self {
        let mut p = self.clone();
        if self.record_count > 0 {
            let factor = count as f64 / self.record_count as f64;
            let scale = |v: u64| (v as f64 * factor).round() as u64;
            p.errors.hot_entries = scale(self.errors.hot_entries);
            p.errors.cold_min = scale(self.errors.cold_min);
            p.errors.cold_max = scale(self.errors.cold_max).max(p.errors.cold_min);
        }
        p.record_count = count;
        p
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidProfile(m));
        if parse_timestamp(&self.start).is_none() {
            return bad(format!("start {:?} is not an RFC 3339 timestamp", self.start));
        }
        if self.span_days == 0 {
            return bad("span_days must be at least 1".into());
        }
        if self.labs == 0 || self.workflows == 0 {
            return bad("labs and workflows must be at least 1".into());
        }
        if self.states.is_empty() {
            return bad("at least one state is required".into());
        }
        for s in &self.states {
            if !(s.weight.is_finite() && s.weight >= 0.0) {
                return bad(format!("state {} has a negative or non-finite weight", s.state));
            }
            if !(0.0..=1.0).contains(&s.started_fraction) {
                return bad(format!("state {} started_fraction outside [0, 1]", s.state));
            }
            if !(s.mean_start_delay_secs.is_finite() && s.mean_start_delay_secs >= 0.0) {
                return bad(format!("state {} has a negative mean delay", s.state));
            }
        }
        if self.states.iter().map(|s| s.weight).sum::<f64>() <= 0.0 && self.record_count > 0 {
            return bad("state weights sum to zero".into());
        }
        if !(0.0..=1.0).contains(&self.hot_workflow_job_share) {
            return bad("hot_workflow_job_share outside [0, 1]".into());
        }
        for (name, v) in [
            ("delay_sigma", self.delay_sigma),
            ("execution_sigma", self.execution_sigma),
            ("execution_median_secs", self.execution_median_secs),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.errors.cold_min > self.errors.cold_max {
            return bad("errors.cold_min exceeds errors.cold_max".into());
        }
        if !(0.0..1.0).contains(&self.errors.min_hot_share) {
            return bad("errors.min_hot_share outside [0, 1)".into());
        }
        Ok(())
    }

    fn state_counts(&self) -> Vec<usize> {
        let total: f64 = self.states.iter().map(|s| s.weight).sum();
        if total <= 0.0 {
            return vec![0; self.states.len()];
        }
        let exact: Vec<f64> = self
            .states
            .iter()
            .map(|s| s.weight / total * self.record_count as f64)
            .collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut remaining = self.record_count - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        for i in order {
            if remaining == 0 {
                break;
            }
            counts[i] += 1;
            remaining -= 1;
        }
        counts
    }
}

const LAB_NAMES: [&str; 6] = [
    "LAB-BOS-01",
    "LAB-CAM-02",
    "LAB-BSL-03",
    "LAB-SDG-04",
    "LAB-LDN-05",
    "LAB-SHA-06",
];

const WORKFLOW_NAMES: [&str; 15] = [
    "Compound Screening",
    "ELISA Assay",
    "qPCR Setup",
    "Cell Viability Assay",
    "Plate Replication",
    "Serial Dilution",
    "Hit Confirmation",
    "Sample Normalization",
    "Protein Quantification",
    "Library Preparation",
    "Kinase Panel",
    "Solubility Screen",
    "Plate Reformatting",
    "Dose Response",
    "Sample Intake",
];

const ERROR_MESSAGES: [&str; 8] = [
    "Liquid handler timeout on deck position 4",
    "Plate barcode mismatch at reader",
    "Incubator temperature out of range",
    "Gripper failed to pick up labware",
    "Reagent reservoir empty",
    "Plate reader returned no data",
    "Tip pickup failure on channel 3",
    "Scheduler lost connection to device",
];

const STEP_NAMES: [&str; 6] = ["Dispense", "Incubate", "Read Plate", "Transfer", "Seal", "Centrifuge"];

fn uuid_from(rng: &mut ChaCha8Rng) -> String {
    uuid::Builder::from_random_bytes(rng.gen()).into_uuid().to_string()
}

struct Workflow {
    id: String,
    name: &'static str,
    lab: &'static str,
}

struct Draft {
    workflow: usize,
    state: JobState,
    created: Timestamp,
    delay_raw: Option<f64>,
    delay_us: i64,
    exec_us: Option<i64>,
    errors: u64,
}

/// Generates a corpus that is a pure function of `(seed, profile)`.
pub fn generate_synthetic(seed: u64, profile: &GenerationProfile) -> Result<Vec<JobRecord>, DatasetError> {
    profile.validate()?;
    let states: Vec<JobState> = profile
        .states
        .iter()
        .map(|s| {
            JobState::parse(&s.state).ok_or_else(|| DatasetError::InvalidProfile(format!("unknown state {}", s.state)))
        })
        .collect::<Result<_, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = profile.record_count;
    let start = parse_timestamp(&profile.start).expect("validated");
    let utc = FixedOffset::east_opt(0).expect("zero offset");
    let start = utc.from_utc_datetime(&start.naive_utc());

    let labs: Vec<&'static str> = (0..profile.labs).map(|i| LAB_NAMES[i % LAB_NAMES.len()]).collect();
    let workflows: Vec<Workflow> = (0..profile.workflows)
        .map(|i| Workflow {
            id: uuid_from(&mut rng),
            name: WORKFLOW_NAMES[i % WORKFLOW_NAMES.len()],
            lab: labs[i % labs.len()],
        })
        .collect();

    // Workflow assignment: every workflow gets one job first, the rest by weight.
    let mut assignment: Vec<usize> = (0..n.min(workflows.len())).collect();
    if n > assignment.len() {
        let cold = (workflows.len() - 1).max(1) as f64;
        let weights: Vec<f64> = (0..workflows.len())
            .map(|i| {
                if workflows.len() == 1 {
                    1.0
                } else if i == 0 {
                    profile.hot_workflow_job_share
                } else {
                    (1.0 - profile.hot_workflow_job_share) / cold
                }
            })
            .collect();
        let dist =
            WeightedIndex::new(&weights).map_err(|e| DatasetError::InvalidProfile(format!("workflow weights: {e}")))?;
        while assignment.len() < n {
            assignment.push(dist.sample(&mut rng));
        }
    }
    assignment.shuffle(&mut rng);

    let mut state_list: Vec<JobState> = profile
        .state_counts()
        .into_iter()
        .zip(&states)
        .flat_map(|(count, &st)| std::iter::repeat_n(st, count))
        .collect();
    state_list.shuffle(&mut rng);

    let span_us = i64::from(profile.span_days) * 86_400 * 1_000_000;
    let mut created: Vec<i64> = (0..n).map(|_| rng.gen_range(0..span_us)).collect();
    created.sort_unstable();

    let delay_dist =
        LogNormal::new(0.0, profile.delay_sigma).map_err(|e| DatasetError::InvalidProfile(e.to_string()))?;
    let exec_dist = LogNormal::new(profile.execution_median_secs.ln(), profile.execution_sigma)
        .map_err(|e| DatasetError::InvalidProfile(e.to_string()))?;

    let mut drafts: Vec<Draft> = (0..n)
        .map(|i| {
            let state = state_list[i];
            let sp = &profile.states[states.iter().position(|&s| s == state).unwrap()];
            let started = rng.gen_bool(sp.started_fraction);
            let delay_raw = started.then(|| delay_dist.sample(&mut rng));
            let exec_us =
                (started && state.is_terminal()).then(|| (exec_dist.sample(&mut rng) * MICROS_PER_SEC).round() as i64);
            Draft {
                workflow: assignment[i],
                state,
                created: start + Duration::microseconds(created[i]),
                delay_raw,
                delay_us: 0,
                exec_us,
                errors: 0,
            }
        })
        .collect();

    calibrate_delays(&mut drafts, &states, profile);
    allocate_errors(&mut drafts, workflows.len(), &profile.errors, &mut rng);

    let mut seq = vec![0usize; workflows.len()];
    let records = drafts
        .iter()
        .map(|d| {
            seq[d.workflow] += 1;
            build_record(d, &workflows[d.workflow], seq[d.workflow], &mut rng)
        })
        .collect();
    Ok(records)
}

/// Rescales raw delays per state so the mean over started jobs hits the
/// target exactly (in whole microseconds).
fn calibrate_delays(drafts: &mut [Draft], states: &[JobState], profile: &GenerationProfile) {
    for (sp, &state) in profile.states.iter().zip(states) {
        let idx: Vec<usize> = drafts
            .iter()
            .enumerate()
            .filter(|(_, d)| d.state == state && d.delay_raw.is_some())
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            continue;
        }
        let raw_sum: f64 = idx.iter().map(|&i| drafts[i].delay_raw.unwrap()).sum();
        let target_total = (sp.mean_start_delay_secs * MICROS_PER_SEC * idx.len() as f64).round() as i64;
        let factor = target_total as f64 / raw_sum;
        let mut total = 0i64;
        for &i in &idx {
            let us = (drafts[i].delay_raw.unwrap() * factor).round() as i64;
            drafts[i].delay_us = us;
            total += us;
        }
        let largest = *idx
            .iter()
            .max_by_key(|&&i| (drafts[i].delay_us, std::cmp::Reverse(i)))
            .unwrap();
        drafts[largest].delay_us += target_total - total;
    }
}

fn allocate_errors(drafts: &mut [Draft], workflow_count: usize, errors: &ErrorProfile, rng: &mut ChaCha8Rng) {
    let mut totals = vec![0u64; workflow_count];
    totals[0] = errors.hot_entries;
    let cold = workflow_count.saturating_sub(1);
    if cold > 0 {
        let lo = (errors.cold_min.max(1)) as f64;
        let hi = (errors.cold_max.max(1)) as f64;
        for t in totals.iter_mut().skip(1) {
            let x: f64 = rng.gen_range(lo.ln()..=hi.ln());
            *t = (x.exp().round() as u64).clamp(errors.cold_min, errors.cold_max);
        }
        // Pin the range endpoints when there are at least two cold workflows.
        if cold >= 2 {
            totals[1] = errors.cold_max;
            totals[workflow_count - 1] = errors.cold_min;
        }
        let cold_sum: u64 = totals[1..].iter().sum();
        let allowed = if errors.min_hot_share > 0.0 {
            (errors.hot_entries as f64 * (1.0 / errors.min_hot_share - 1.0)).floor() as u64
        } else {
            u64::MAX
        };
        if cold_sum > allowed {
            let scale = allowed as f64 / cold_sum as f64;
            for t in totals.iter_mut().skip(1) {
                *t = ((*t as f64 * scale).floor() as u64).max(errors.cold_min);
            }
        }
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); workflow_count];
    for (i, d) in drafts.iter().enumerate() {
        members[d.workflow].push(i);
    }
    for (wf, total) in totals.into_iter().enumerate() {
        let jobs = &members[wf];
        if jobs.is_empty() {
            continue;
        }
        for _ in 0..total {
            let j = jobs[rng.gen_range(0..jobs.len())];
            drafts[j].errors += 1;
        }
    }
}

fn log_entry(level: &str, message: &str, at: Timestamp) -> JsonValue {
    json!({
        "level": level,
        "message": message,
        "created_timestamp": format_timestamp(&at),
    })
}

fn build_record(d: &Draft, wf: &Workflow, seq: usize, rng: &mut ChaCha8Rng) -> JobRecord {
    let id = uuid_from(rng);
    let started = d.delay_raw.map(|_| d.created + Duration::microseconds(d.delay_us));
    let completed = match (started, d.exec_us) {
        (Some(s), Some(us)) => Some(s + Duration::microseconds(us)),
        _ => None,
    };

    let mut logs = vec![(d.created, log_entry("INFO", "Job created", d.created))];
    if let Some(s) = started {
        logs.push((s, log_entry("INFO", "Job started", s)));
    }
    if let Some(c) = completed {
        let msg = match d.state {
            JobState::Completed => "Job completed",
            JobState::InError => "Job failed",
            _ => "Job cancelled",
        };
        logs.push((c, log_entry("INFO", msg, c)));
    }
    if rng.gen_bool(0.1) {
        let at = started.unwrap_or(d.created);
        logs.push((at, log_entry("WARN", "Reagent volume below recommended threshold", at)));
    }
    let window_end = completed.or(started).unwrap_or(d.created) + Duration::minutes(10);
    let window_us = (window_end - d.created).num_microseconds().unwrap_or(0).max(1);
    for _ in 0..d.errors {
        let at = d.created + Duration::microseconds(rng.gen_range(0..window_us));
        let msg = ERROR_MESSAGES[rng.gen_range(0..ERROR_MESSAGES.len())];
        logs.push((at, log_entry("ERROR", msg, at)));
    }
    logs.sort_by_key(|(at, _)| *at);
    let logs: Vec<JsonValue> = logs.into_iter().map(|(_, v)| v).collect();

    let execution_records = match started {
        Some(s) if rng.gen_bool(0.96) => {
            let end = completed.unwrap_or(s + Duration::minutes(30));
            let steps = rng.gen_range(1..=3usize);
            let slice_us = ((end - s).num_microseconds().unwrap_or(0) / steps as i64).max(0);
            let recs: Vec<JsonValue> = (0..steps)
                .map(|k| {
                    let a = s + Duration::microseconds(slice_us * k as i64);
                    let b = a + Duration::microseconds(slice_us);
                    json!({
                        "event_type": "STEP",
                        "name": STEP_NAMES[rng.gen_range(0..STEP_NAMES.len())],
                        "started_timestamp": format_timestamp(&a),
                        "finished_timestamp": format_timestamp(&b),
                    })
                })
                .collect();
            Some(JsonValue::Array(recs))
        }
        _ => None,
    };

    let plates: u32 = rng.gen_range(1..=8);
    let mut outputs = json!({ "error_log_count": d.errors });
    if d.state == JobState::Completed {
        outputs["plates_processed"] = json!(plates);
    }

    let priority = ["low", "normal", "high"][rng.gen_range(0..3)];
    let protocol = ["v1", "v2", "v3"][rng.gen_range(0..3)];

    JobRecord {
        id,
        name: format!("{} #{seq:04}", wf.name),
        lab_id: wf.lab.to_string(),
        workflow_id: wf.id.clone(),
        state: d.state.as_str().to_string(),
        created_timestamp: d.created,
        started_timestamp: started,
        completed_timestamp: completed,
        root_action_id: rng.gen_bool(0.7).then(|| uuid_from(rng)),
        lab_reference: rng
            .gen_bool(0.6)
            .then(|| format!("ELN-{:05}", rng.gen_range(0..100_000))),
        associated_ids: rng
            .gen_bool(0.5)
            .then(|| json!([format!("SAMPLE-{:05}", rng.gen_range(0..100_000))])),
        parameters: Some(json!({
            "plate_count": plates,
            "priority": priority,
            "protocol_version": protocol,
        })),
        outputs: Some(outputs),
        barcodes: rng
            .gen_bool(0.7)
            .then(|| json!([format!("PLT-{:06}", rng.gen_range(0..1_000_000))])),
        batched_job_ids: rng.gen_bool(0.1).then(|| json!([uuid_from(rng)])),
        children_job_ids: rng.gen_bool(0.05).then(|| json!([uuid_from(rng)])),
        execution_records,
        logs: Some(JsonValue::Array(logs)),
        files: rng.gen_bool(0.2).then(|| json!([{ "name": "results.csv" }])),
        notes: rng
            .gen_bool(0.1)
            .then(|| json!({ "text": "Re-run requested by operator" })),
        configuration_versions: Some(json!({ "workflow": rng.gen_range(1..=5) })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datastore::io::to_jsonl_string;
    use std::collections::BTreeMap;

    fn small() -> GenerationProfile {
        GenerationProfile::default().with_record_count(300)
    }

    #[test]
    fn default_state_counts_are_exact() {
        let counts = GenerationProfile::default().state_counts();
        assert_eq!(counts, vec![3600, 520, 380, 210, 96, 225]);
    }

    #[test]
    fn deterministic_for_seed() {
        let a = generate_synthetic(7, &small()).unwrap();
        let b = generate_synthetic(7, &small()).unwrap();
        assert_eq!(to_jsonl_string(&a), to_jsonl_string(&b));
        let c = generate_synthetic(8, &small()).unwrap();
        assert_ne!(to_jsonl_string(&a), to_jsonl_string(&c));
    }

    #[test]
    fn state_means_are_pinned() {
        let p = small();
        let recs = generate_synthetic(3, &p).unwrap();
        let mut acc: BTreeMap<&str, (i64, i64)> = BTreeMap::new();
        for r in &recs {
            if let Some(s) = r.started_timestamp {
                let e = acc.entry(r.state.as_str()).or_default();
                e.0 += (s - r.created_timestamp).num_microseconds().unwrap();
                e.1 += 1;
            }
        }
        for sp in &p.states {
            if let Some(&(sum, n)) = acc.get(sp.state.as_str()) {
                let mean = sum as f64 / n as f64 / MICROS_PER_SEC;
                assert!((mean - sp.mean_start_delay_secs).abs() < 1e-5, "{}: {mean}", sp.state);
            }
        }
    }

    #[test]
    fn count_override() {
        let recs = generate_synthetic(1, &GenerationProfile::default().with_record_count(10)).unwrap();
        assert_eq!(recs.len(), 10);
    }

    #[test]
    fn invalid_profiles() {
        let mut p = GenerationProfile::default();
        p.states[0].weight = -1.0;
        assert!(matches!(
            generate_synthetic(1, &p),
            Err(DatasetError::InvalidProfile(_))
        ));
        assert!(GenerationProfile::from_toml("record_count = -5").is_err());
        let ok = GenerationProfile::from_toml("record_count = 12\nspan_days = 3").unwrap();
        assert_eq!(ok.record_count, 12);
        assert_eq!(ok.states.len(), 6);
    }

    #[test]
    fn error_log_count_matches_logs() {
        for r in generate_synthetic(5, &small()).unwrap() {
            let errors = r
                .logs
                .as_ref()
                .unwrap()
                .as_array()
                .unwrap()
                .iter()
                .filter(|e| e["level"] == "ERROR")
                .count() as u64;
            assert_eq!(r.outputs.as_ref().unwrap()["error_log_count"], json!(errors));
        }
    }
}
