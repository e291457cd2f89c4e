//! Column metadata for the `jobs` table.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataType {
    Varchar,
    TimestampTz,
    Jsonb,
}

impl DataType {
    pub fn sql_name(self) -> &'static str {
        match self {
            DataType::Varchar => "VARCHAR(255)",
            DataType::TimestampTz => "TIMESTAMP WITH TIME ZONE",
            DataType::Jsonb => "JSONB",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub data_type: DataType,
    pub nullable: bool,
    /// Free-text hint shown to the model in the schema listing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ColumnDef {
    fn new(name: &str, data_type: DataType, nullable: bool, note: Option<&str>) -> Self {
        ColumnDef {
            name: name.to_string(),
            data_type,
            nullable,
            note: note.map(str::to_string),
        }
    }
}

/// The 21 columns of `jobs`, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Column {
    Id,
    Name,
    LabId,
    WorkflowId,
    State,
    CreatedTimestamp,
    StartedTimestamp,
    CompletedTimestamp,
    RootActionId,
    LabReference,
    AssociatedIds,
    Parameters,
    Outputs,
    Barcodes,
    BatchedJobIds,
    ChildrenJobIds,
    ExecutionRecords,
    Logs,
    Files,
    Notes,
    ConfigurationVersions,
}

impl Column {
    pub const ALL: [Column; 21] = [
        Column::Id,
        Column::Name,
        Column::LabId,
        Column::WorkflowId,
        Column::State,
        Column::CreatedTimestamp,
        Column::StartedTimestamp,
        Column::CompletedTimestamp,
        Column::RootActionId,
        Column::LabReference,
        Column::AssociatedIds,
        Column::Parameters,
        Column::Outputs,
        Column::Barcodes,
        Column::BatchedJobIds,
        Column::ChildrenJobIds,
        Column::ExecutionRecords,
        Column::Logs,
        Column::Files,
        Column::Notes,
        Column::ConfigurationVersions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Column::Id => "id",
            Column::Name => "name",
            Column::LabId => "lab_id",
            Column::WorkflowId => "workflow_id",
            Column::State => "state",
            Column::CreatedTimestamp => "created_timestamp",
            Column::StartedTimestamp => "started_timestamp",
            Column::CompletedTimestamp => "completed_timestamp",
            Column::RootActionId => "root_action_id",
            Column::LabReference => "lab_reference",
            Column::AssociatedIds => "associated_ids",
            Column::Parameters => "parameters",
            Column::Outputs => "outputs",
            Column::Barcodes => "barcodes",
            Column::BatchedJobIds => "batched_job_ids",
            Column::ChildrenJobIds => "children_job_ids",
            Column::ExecutionRecords => "execution_records",
            Column::Logs => "logs",
            Column::Files => "files",
            Column::Notes => "notes",
            Column::ConfigurationVersions => "configuration_versions",
        }
    }

    pub fn from_name(name: &str) -> Option<Column> {
        Column::ALL.iter().copied().find(|c| c.name() == name)
    }

    pub fn data_type(self) -> DataType {
        match self {
            Column::Id
            | Column::Name
            | Column::LabId
            | Column::WorkflowId
            | Column::State
            | Column::RootActionId
            | Column::LabReference => DataType::Varchar,
            Column::CreatedTimestamp | Column::StartedTimestamp | Column::CompletedTimestamp => DataType::TimestampTz,
            _ => DataType::Jsonb,
        }
    }

    pub fn nullable(self) -> bool {
        !matches!(
            self,
            Column::Id | Column::Name | Column::LabId | Column::WorkflowId | Column::State | Column::CreatedTimestamp
        )
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub table_name: String,
    pub columns: Vec<ColumnDef>,
}

impl TableSchema {
    /// The bundled `jobs` schema.
    pub fn jobs() -> Self {
        let columns = Column::ALL
            .iter()
            .map(|&c| {
                let note = match c {
                    Column::Id => Some("Primary key"),
                    Column::State => Some("e.g., 'COMPLETED', 'IN_ERROR'"),
                    Column::Outputs => {
                        Some("Object; top-level key 'error_log_count' holds the number of ERROR-level entries in logs")
                    }
                    Column::ExecutionRecords => {
                        Some("Array of objects with 'event_type', 'name', 'started_timestamp', 'finished_timestamp'")
                    }
                    Column::Logs => Some("Array of objects with 'level', 'message', 'created_timestamp'"),
                    _ => None,
                };
                ColumnDef::new(c.name(), c.data_type(), c.nullable(), note)
            })
            .collect();
        TableSchema {
            table_name: "jobs".to_string(),
            columns,
        }
    }

    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// Plain-text listing used for the `{table_schema}` prompt placeholder.
    pub fn to_prompt_text(&self) -> String {
        let mut out = format!("Table: {}\n", self.table_name);
        for col in &self.columns {
            out.push_str(&format!("- {} {}", col.name, col.data_type.sql_name()));
            if !col.nullable {
                out.push_str(" NOT NULL");
            }
            if let Some(note) = &col.note {
                out.push_str(&format!(" -- {note}"));
            }
            out.push('\n');
        }
        out
    }
}

impl Default for TableSchema {
    fn default() -> Self {
        TableSchema::jobs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_has_21_columns_in_order() {
        let schema = TableSchema::jobs();
        assert_eq!(schema.columns.len(), 21);
        assert_eq!(schema.columns[0].name, "id");
        assert_eq!(schema.columns[20].name, "configuration_versions");
        let names: Vec<_> = schema.column_names().collect();
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), names.len());
    }

    #[test]
    fn not_null_flags() {
        let schema = TableSchema::jobs();
        let required: Vec<_> = schema
            .columns
            .iter()
            .filter(|c| !c.nullable)
            .map(|c| c.name.as_str())
            .collect();
        assert_eq!(
            required,
            ["id", "name", "lab_id", "workflow_id", "state", "created_timestamp"]
        );
    }

    #[test]
    fn types_cover_three_kinds() {
        let schema = TableSchema::jobs();
        let count = |t| schema.columns.iter().filter(|c| c.data_type == t).count();
        assert_eq!(count(DataType::Varchar), 7);
        assert_eq!(count(DataType::TimestampTz), 3);
        assert_eq!(count(DataType::Jsonb), 11);
    }
}
