//! Loading of text-to-SQL corpora in the Spider file layout.
//!
//! Schemas come from a `tables.json`-style array; question/query pairs
//! from a `train_spider.json`/`dev.json`-style array. Unknown fields are
//! ignored so different corpus releases load the same way.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{
    normalize_name, ColumnDef, ColumnRef, DatabaseSchema, ForeignKey, SchemaError, TableDef,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: expected a JSON array at the top level")]
    NotAnArray { path: PathBuf },
    #[error("schema {db_id:?} ({field}): {message}")]
    Schema {
        db_id: String,
        field: String,
        message: String,
    },
    #[error(transparent)]
    Invalid(#[from] SchemaError),
    #[error("db_id {0:?} appears more than once")]
    DuplicateDbId(String),
    #[error("example [{index}]: {message}")]
    Example { index: usize, message: String },
    #[error("example [{index}]: unknown db_id {db_id:?}")]
    UnknownDbId { index: usize, db_id: String },
}

impl IngestError {
    /// True when the input file itself could not be opened.
    pub fn is_missing_file(&self) -> bool {
        matches!(self, IngestError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

fn read_array(path: &Path) -> Result<Vec<Value>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: Value = serde_json::from_str(&text).map_err(|source| IngestError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    match value {
        Value::Array(items) => Ok(items),
        _ => Err(IngestError::NotAnArray {
            path: path.to_path_buf(),
        }),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum KeyEntry {
    Single(i64),
    Composite(Vec<i64>),
}

#[derive(Deserialize)]
struct RawSchema {
    db_id: String,
    table_names_original: Vec<String>,
    #[serde(default)]
    table_names: Option<Vec<String>>,
    column_names_original: Vec<(i64, String)>,
    #[serde(default)]
    column_names: Option<Vec<(i64, String)>>,
    #[serde(default)]
    column_types: Vec<String>,
    #[serde(default)]
    foreign_keys: Vec<(i64, i64)>,
    #[serde(default)]
    primary_keys: Vec<KeyEntry>,
}

/// Builds one schema from a single Spider schema object.
pub fn parse_schema(value: &Value) -> Result<DatabaseSchema, IngestError> {
    let db_id = value
        .get("db_id")
        .and_then(Value::as_str)
        .unwrap_or("<missing db_id>")
        .to_string();
    let raw: RawSchema =
        serde_json::from_value(value.clone()).map_err(|e| IngestError::Schema {
            db_id: db_id.clone(),
            field: "<object>".into(),
            message: e.to_string(),
        })?;
    let err = |field: String, message: String| IngestError::Schema {
        db_id: db_id.clone(),
        field,
        message,
    };

    let mut tables: Vec<TableDef> = raw
        .table_names_original
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut t = TableDef::new(name, Vec::new());
            t.alias = raw
                .table_names
                .as_ref()
                .and_then(|names| names.get(i))
                .map(|a| normalize_name(a));
            t
        })
        .collect();

    let mut source_columns = Vec::with_capacity(raw.column_names_original.len());
    for (i, (table, name)) in raw.column_names_original.iter().enumerate() {
        if *table < 0 {
            source_columns.push(None);
            continue;
        }
        let t = *table as usize;
        let Some(table_def) = tables.get_mut(t) else {
            return Err(err(
                format!("column_names_original[{i}]"),
                format!("table index {table} out of range"),
            ));
        };
        let value_type = raw
            .column_types
            .get(i)
            .cloned()
            .unwrap_or_else(|| "text".to_string());
        let mut column = ColumnDef::new(name, &value_type);
        column.alias = raw
            .column_names
            .as_ref()
            .and_then(|names| names.get(i))
            .map(|(_, a)| normalize_name(a));
        source_columns.push(Some(ColumnRef::new(t, table_def.columns.len())));
        table_def.columns.push(column);
    }

    let resolve = |field: String, index: i64| -> Result<ColumnRef, IngestError> {
        usize::try_from(index)
            .ok()
            .and_then(|i| source_columns.get(i).copied().flatten())
            .ok_or_else(|| err(field, format!("column index {index} out of range")))
    };

    let foreign_keys = raw
        .foreign_keys
        .iter()
        .enumerate()
        .map(|(i, (from, to))| {
            Ok(ForeignKey {
                from: resolve(format!("foreign_keys[{i}][0]"), *from)?,
                to: resolve(format!("foreign_keys[{i}][1]"), *to)?,
            })
        })
        .collect::<Result<Vec<_>, IngestError>>()?;

    let mut primary_keys = Vec::new();
    for (i, entry) in raw.primary_keys.iter().enumerate() {
        match entry {
            KeyEntry::Single(c) => primary_keys.push(resolve(format!("primary_keys[{i}]"), *c)?),
            KeyEntry::Composite(cs) => {
                for (j, c) in cs.iter().enumerate() {
                    primary_keys.push(resolve(format!("primary_keys[{i}][{j}]"), *c)?);
                }
            }
        }
    }

    Ok(
        DatabaseSchema::new(raw.db_id, tables, foreign_keys, primary_keys)?
            .with_source_columns(source_columns),
    )
}

/// Loads every schema in a file. Any invalid schema fails the whole load.
pub fn load_schemas(path: impl AsRef<Path>) -> Result<Vec<DatabaseSchema>, IngestError> {
    let (schemas, failures) = load_schemas_partitioned(path)?;
    match failures.into_iter().next() {
        Some((_, e)) => Err(e),
        None => Ok(schemas),
    }
}

/// Valid schemas, and each rejected schema's db_id with the reason.
pub type PartitionedSchemas = (Vec<DatabaseSchema>, Vec<(String, IngestError)>);

/// Loads a schema file, isolating per-database failures.
///
/// File-level problems (unreadable, malformed JSON, duplicate ids) are
/// still fatal. Each failure is paired with its db_id.
pub fn load_schemas_partitioned(path: impl AsRef<Path>) -> Result<PartitionedSchemas, IngestError> {
    let items = read_array(path.as_ref())?;
    let mut seen = HashSet::new();
    let mut schemas = Vec::new();
    let mut failures = Vec::new();
    for item in &items {
        let db_id = item
            .get("db_id")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        if !db_id.is_empty() && !seen.insert(db_id.clone()) {
            return Err(IngestError::DuplicateDbId(db_id));
        }
        match parse_schema(item) {
            Ok(s) => schemas.push(s),
            Err(e) => failures.push((db_id, e)),
        }
    }
    Ok((schemas, failures))
}

/// One question/query pair tied to a database.
#[derive(Debug, Clone, PartialEq)]
pub struct ExamplePair {
    /// Position in the source file.
    pub index: usize,
    pub db_id: String,
    pub utterance: String,
    pub utterance_tokens: Option<Vec<String>>,
    pub sql_text: String,
    /// The corpus's own pre-parsed query, kept for cross-checking.
    pub parsed_sql: Option<Value>,
}

#[derive(Serialize, Deserialize)]
struct RawExample {
    db_id: String,
    question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    question_toks: Option<Vec<String>>,
    query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sql: Option<Value>,
}

impl ExamplePair {
    /// Spider-convention JSON object for this pair.
    pub fn to_json(&self) -> Value {
        serde_json::to_value(RawExample {
            db_id: self.db_id.clone(),
            question: self.utterance.clone(),
            question_toks: self.utterance_tokens.clone(),
            query: self.sql_text.clone(),
            sql: self.parsed_sql.clone(),
        })
        .expect("plain data serializes")
    }
}

fn parse_example(index: usize, value: &Value) -> Result<ExamplePair, IngestError> {
    let Value::Object(map) = value else {
        return Err(IngestError::Example {
            index,
            message: "not a JSON object".into(),
        });
    };
    for field in ["db_id", "question", "query"] {
        match map.get(field) {
            Some(Value::String(_)) => {}
            Some(_) => {
                return Err(IngestError::Example {
                    index,
                    message: format!("field {field:?} is not a string"),
                })
            }
            None => {
                return Err(IngestError::Example {
                    index,
                    message: format!("missing field {field:?}"),
                })
            }
        }
    }
    let raw: RawExample =
        serde_json::from_value(value.clone()).map_err(|e| IngestError::Example {
            index,
            message: e.to_string(),
        })?;
    Ok(ExamplePair {
        index,
        db_id: raw.db_id,
        utterance: raw.question,
        utterance_tokens: raw.question_toks,
        sql_text: raw.query,
        parsed_sql: raw.sql.filter(|v| !v.is_null()),
    })
}

/// Loads pairs and checks each db_id against `schemas`. Order is preserved.
pub fn load_examples(
    path: impl AsRef<Path>,
    schemas: &[DatabaseSchema],
) -> Result<Vec<ExamplePair>, IngestError> {
    let known: HashSet<&str> = schemas.iter().map(|s| s.db_id()).collect();
    load_examples_for(path, &known)
}

/// Like [`load_examples`], against an explicit set of known db_ids.
pub fn load_examples_for(
    path: impl AsRef<Path>,
    known_db_ids: &HashSet<&str>,
) -> Result<Vec<ExamplePair>, IngestError> {
    let items = read_array(path.as_ref())?;
    items
        .iter()
        .enumerate()
        .map(|(index, item)| {
            let pair = parse_example(index, item)?;
            if !known_db_ids.contains(pair.db_id.as_str()) {
                return Err(IngestError::UnknownDbId {
                    index,
                    db_id: pair.db_id,
                });
            }
            Ok(pair)
        })
        .collect()
}
