//! JSON-lines and CSV dataset files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde_json::Map;

use super::record::{format_timestamp, JobRecord};
use super::schema::{Column, DataType};
use super::{DatasetError, JsonValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    /// Guesses the format from a file extension, defaulting to JSON-lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Jsonl,
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" => Ok(DatasetFormat::Jsonl),
            "csv" => Ok(DatasetFormat::Csv),
            other => Err(format!("unknown dataset format '{other}'")),
        }
    }
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<JobRecord>, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    match format {
        DatasetFormat::Jsonl => read_jsonl(reader),
        DatasetFormat::Csv => read_csv(reader),
    }
}

/// Parses JSON-lines; blank lines are skipped and do not count as rows.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<JobRecord>, DatasetError> {
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|source| DatasetError::Io {
            path: "<reader>".to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row = records.len();
        let value: JsonValue = serde_json::from_str(&line).map_err(|e| DatasetError::Malformed {
            row,
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| DatasetError::Malformed {
            row,
            message: "line is not a JSON object".to_string(),
        })?;
        records.push(JobRecord::from_json_object(obj, row)?);
    }
    Ok(records)
}

/// Parses CSV with a header row. Empty cells are NULL; JSONB cells hold JSON text.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<JobRecord>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DatasetError::Malformed {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let mut records = Vec::new();
    for (row, result) in rdr.records().enumerate() {
        let rec = result.map_err(|e| DatasetError::Malformed {
            row,
            message: e.to_string(),
        })?;
        let mut obj = Map::new();
        for (header, cell) in headers.iter().zip(rec.iter()) {
            let value = if cell.is_empty() {
                JsonValue::Null
            } else {
                match Column::from_name(header).map(Column::data_type) {
                    Some(DataType::Jsonb) => serde_json::from_str(cell).map_err(|e| DatasetError::SchemaViolation {
                        row,
                        column: header.to_string(),
                        reason: format!("invalid JSON: {e}"),
                    })?,
                    _ => JsonValue::String(cell.to_string()),
                }
            };
            obj.insert(header.to_string(), value);
        }
        records.push(JobRecord::from_json_object(&obj, row)?);
    }
    Ok(records)
}

pub fn write_jsonl<W: Write>(records: &[JobRecord], writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn to_jsonl_string(records: &[JobRecord]) -> String {
    let mut buf = Vec::new();
    write_jsonl(records, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn write_csv<W: Write>(records: &[JobRecord], writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(Column::ALL.iter().map(|c| c.name()))?;
    for rec in records {
        let cells: Vec<String> = Column::ALL
            .iter()
            .map(|&c| match rec.cell(c) {
                super::CellRef::Null => String::new(),
                super::CellRef::Text(s) => s.to_string(),
                super::CellRef::Timestamp(ts) => format_timestamp(ts),
                super::CellRef::Json(v) => v.to_string(),
            })
            .collect();
        w.write_record(&cells)?;
    }
    w.flush()?;
    Ok(())
}
