use std::fmt;

use chrono::{DateTime, FixedOffset};
use serde::{Serialize, Serializer};
use serde_json::Map;

use super::schema::Column;
use super::{DatasetError, JsonValue};

pub type Timestamp = DateTime<FixedOffset>;

/// Job states seen in the bundled corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JobState {
    Completed,
    InError,
    Cancelled,
    Running,
    Paused,
    Unscheduled,
}

impl JobState {
    pub const ALL: [JobState; 6] = [
        JobState::Completed,
        JobState::InError,
        JobState::Cancelled,
        JobState::Running,
        JobState::Paused,
        JobState::Unscheduled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            JobState::Completed => "COMPLETED",
            JobState::InError => "IN_ERROR",
            JobState::Cancelled => "CANCELLED",
            JobState::Running => "RUNNING",
            JobState::Paused => "PAUSED",
            JobState::Unscheduled => "UNSCHEDULED",
        }
    }

    pub fn parse(s: &str) -> Option<JobState> {
        JobState::ALL.iter().copied().find(|st| st.as_str() == s)
    }

    /// Whether a started job in this state carries a completion timestamp.
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Completed | JobState::InError | JobState::Cancelled)
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of `jobs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobRecord {
    pub id: String,
    pub name: String,
    pub lab_id: String,
    pub workflow_id: String,
    pub state: String,
    #[serde(serialize_with = "ser_ts")]
    pub created_timestamp: Timestamp,
    #[serde(serialize_with = "ser_opt_ts")]
    pub started_timestamp: Option<Timestamp>,
    #[serde(serialize_with = "ser_opt_ts")]
    pub completed_timestamp: Option<Timestamp>,
    pub root_action_id: Option<String>,
    pub lab_reference: Option<String>,
    pub associated_ids: Option<JsonValue>,
    pub parameters: Option<JsonValue>,
    pub outputs: Option<JsonValue>,
    pub barcodes: Option<JsonValue>,
    pub batched_job_ids: Option<JsonValue>,
    pub children_job_ids: Option<JsonValue>,
    pub execution_records: Option<JsonValue>,
    pub logs: Option<JsonValue>,
    pub files: Option<JsonValue>,
    pub notes: Option<JsonValue>,
    pub configuration_versions: Option<JsonValue>,
}

/// Timestamps are written as RFC 3339 with microseconds and an explicit offset.
pub fn format_timestamp(ts: &Timestamp) -> String {
    ts.format("%Y-%m-%dT%H:%M:%S%.6f%:z").to_string()
}

pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    DateTime::parse_from_rfc3339(s.trim()).ok()
}

fn ser_ts<S: Serializer>(ts: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_timestamp(ts))
}

fn ser_opt_ts<S: Serializer>(ts: &Option<Timestamp>, s: S) -> Result<S::Ok, S::Error> {
    match ts {
        Some(ts) => s.serialize_str(&format_timestamp(ts)),
        None => s.serialize_none(),
    }
}

/// A borrowed view of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellRef<'a> {
    Null,
    Text(&'a str),
    Timestamp(&'a Timestamp),
    Json(&'a JsonValue),
}

impl JobRecord {
    pub fn cell(&self, column: Column) -> CellRef<'_> {
        fn text(v: &Option<String>) -> CellRef<'_> {
            v.as_deref().map_or(CellRef::Null, CellRef::Text)
        }
        fn ts(v: &Option<Timestamp>) -> CellRef<'_> {
            v.as_ref().map_or(CellRef::Null, CellRef::Timestamp)
        }
        fn json(v: &Option<JsonValue>) -> CellRef<'_> {
            v.as_ref().map_or(CellRef::Null, CellRef::Json)
        }
        match column {
            Column::Id => CellRef::Text(&self.id),
            Column::Name => CellRef::Text(&self.name),
            Column::LabId => CellRef::Text(&self.lab_id),
            Column::WorkflowId => CellRef::Text(&self.workflow_id),
            Column::State => CellRef::Text(&self.state),
            Column::CreatedTimestamp => CellRef::Timestamp(&self.created_timestamp),
            Column::StartedTimestamp => ts(&self.started_timestamp),
            Column::CompletedTimestamp => ts(&self.completed_timestamp),
            Column::RootActionId => text(&self.root_action_id),
            Column::LabReference => text(&self.lab_reference),
            Column::AssociatedIds => json(&self.associated_ids),
            Column::Parameters => json(&self.parameters),
            Column::Outputs => json(&self.outputs),
            Column::Barcodes => json(&self.barcodes),
            Column::BatchedJobIds => json(&self.batched_job_ids),
            Column::ChildrenJobIds => json(&self.children_job_ids),
            Column::ExecutionRecords => json(&self.execution_records),
            Column::Logs => json(&self.logs),
            Column::Files => json(&self.files),
            Column::Notes => json(&self.notes),
            Column::ConfigurationVersions => json(&self.configuration_versions),
        }
    }

    /// Builds a record from a decoded JSON object, enforcing column types,
    /// non-null constraints and the timestamp/JSONB shape invariants.
    pub fn from_json_object(obj: &Map<String, JsonValue>, row: usize) -> Result<Self, DatasetError> {
        let violation = |column: &str, reason: String| DatasetError::SchemaViolation {
            row,
            column: column.to_string(),
            reason,
        };

        if let Some(unknown) = obj.keys().find(|k| Column::from_name(k).is_none()) {
            return Err(violation(unknown, "unknown column".to_string()));
        }

        let get = |c: Column| obj.get(c.name()).filter(|v| !v.is_null());

        let required_text = |c: Column| -> Result<String, DatasetError> {
            match get(c) {
                None => Err(violation(c.name(), "missing value for non-null column".into())),
                Some(JsonValue::String(s)) => Ok(s.clone()),
                Some(other) => Err(violation(c.name(), format!("expected text, got {other}"))),
            }
        };
        let optional_text = |c: Column| -> Result<Option<String>, DatasetError> {
            match get(c) {
                None => Ok(None),
                Some(JsonValue::String(s)) => Ok(Some(s.clone())),
                Some(other) => Err(violation(c.name(), format!("expected text, got {other}"))),
            }
        };
        let optional_ts = |c: Column| -> Result<Option<Timestamp>, DatasetError> {
            match get(c) {
                None => Ok(None),
                Some(JsonValue::String(s)) => parse_timestamp(s)
                    .map(Some)
                    .ok_or_else(|| violation(c.name(), format!("invalid RFC 3339 timestamp {s:?}"))),
                Some(other) => Err(violation(c.name(), format!("expected timestamp, got {other}"))),
            }
        };
        let json = |c: Column| get(c).cloned();

        let created_timestamp = optional_ts(Column::CreatedTimestamp)?.ok_or_else(|| {
            violation(
                Column::CreatedTimestamp.name(),
                "missing value for non-null column".into(),
            )
        })?;

        let record = JobRecord {
            id: required_text(Column::Id)?,
            name: required_text(Column::Name)?,
            lab_id: required_text(Column::LabId)?,
            workflow_id: required_text(Column::WorkflowId)?,
            state: required_text(Column::State)?,
            created_timestamp,
            started_timestamp: optional_ts(Column::StartedTimestamp)?,
            completed_timestamp: optional_ts(Column::CompletedTimestamp)?,
            root_action_id: optional_text(Column::RootActionId)?,
            lab_reference: optional_text(Column::LabReference)?,
            associated_ids: json(Column::AssociatedIds),
            parameters: json(Column::Parameters),
            outputs: json(Column::Outputs),
            barcodes: json(Column::Barcodes),
            batched_job_ids: json(Column::BatchedJobIds),
            children_job_ids: json(Column::ChildrenJobIds),
            execution_records: json(Column::ExecutionRecords),
            logs: json(Column::Logs),
            files: json(Column::Files),
            notes: json(Column::Notes),
            configuration_versions: json(Column::ConfigurationVersions),
        };
        record.check_invariants(row)?;
        Ok(record)
    }

    pub fn check_invariants(&self, row: usize) -> Result<(), DatasetError> {
        let violation = |column: Column, reason: &str| DatasetError::SchemaViolation {
            row,
            column: column.name().to_string(),
            reason: reason.to_string(),
        };
        if let Some(started) = self.started_timestamp {
            if started < self.created_timestamp {
                return Err(violation(
                    Column::StartedTimestamp,
                    "started_timestamp precedes created_timestamp",
                ));
            }
        }
        if let Some(completed) = self.completed_timestamp {
            match self.started_timestamp {
                Some(started) if completed < started => {
                    return Err(violation(
                        Column::CompletedTimestamp,
                        "completed_timestamp precedes started_timestamp",
                    ))
                }
                _ => {}
            }
        }
        check_entries(self.logs.as_ref(), &["level", "message", "created_timestamp"])
            .map_err(|r| violation(Column::Logs, &r))?;
        check_entries(
            self.execution_records.as_ref(),
            &["event_type", "name", "started_timestamp", "finished_timestamp"],
        )
        .map_err(|r| violation(Column::ExecutionRecords, &r))?;
        Ok(())
    }
}

fn check_entries(value: Option<&JsonValue>, keys: &[&str]) -> Result<(), String> {
    let Some(value) = value else { return Ok(()) };
    let items = value
        .as_array()
        .ok_or_else(|| "expected an array of objects".to_string())?;
    for (i, item) in items.iter().enumerate() {
        let obj = item.as_object().ok_or_else(|| format!("entry {i} is not an object"))?;
        if let Some(missing) = keys.iter().find(|k| !obj.contains_key(**k)) {
            return Err(format!("entry {i} lacks key '{missing}'"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> JsonValue {
        json!({
            "id": "j1", "name": "n", "lab_id": "lab", "workflow_id": "wf",
            "state": "COMPLETED", "created_timestamp": "2024-03-01T00:00:00Z"
        })
    }

    #[test]
    fn minimal_record_parses() {
        let rec = JobRecord::from_json_object(base().as_object().unwrap(), 0).unwrap();
        assert_eq!(rec.state, "COMPLETED");
        assert!(rec.started_timestamp.is_none());
    }

    #[test]
    fn missing_state_is_violation() {
        let mut v = base();
        v.as_object_mut().unwrap().remove("state");
        let err = JobRecord::from_json_object(v.as_object().unwrap(), 0).unwrap_err();
        match err {
            DatasetError::SchemaViolation { row, column, .. } => {
                assert_eq!(row, 0);
                assert_eq!(column, "state");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn started_before_created_rejected() {
        let mut v = base();
        v["started_timestamp"] = json!("2024-02-28T00:00:00Z");
        assert!(JobRecord::from_json_object(v.as_object().unwrap(), 3).is_err());
    }

    #[test]
    fn log_entries_need_keys() {
        let mut v = base();
        v["logs"] = json!([{"level": "ERROR", "message": "x"}]);
        let err = JobRecord::from_json_object(v.as_object().unwrap(), 0).unwrap_err();
        assert!(err.to_string().contains("created_timestamp"), "{err}");
    }

    #[test]
    fn timestamp_format_keeps_offset() {
        let ts = parse_timestamp("2024-03-01T10:00:00.5+02:00").unwrap();
        assert_eq!(format_timestamp(&ts), "2024-03-01T10:00:00.500000+02:00");
    }
}
