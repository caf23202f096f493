use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::model::ErModel;

use super::export::{export_diagram, export_ie_format, DiagramFormat};
use super::{AnnotationRecord, CorpusStats, DatabaseOutput, Diagnostics};

pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const MODEL_FILE: &str = "er_model.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const IE_FILE: &str = "ie.jsonl";
pub const STATS_FILE: &str = "stats.json";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// `field` is the JSON path of the offending value, `line` the line of
    /// a JSON-lines file (1-based).
    #[error("{}{}: {field}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Format {
        path: PathBuf,
        line: Option<usize>,
        field: String,
        message: String,
    },
}

impl OutputError {
    pub fn is_missing_file(&self) -> bool {
        matches!(self, OutputError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, contents: &str) -> Result<(), OutputError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn lines<T: Serialize>(items: &[T]) -> String {
    let mut s = String::new();
    for item in items {
        s.push_str(&serde_json::to_string(item).expect("plain data serializes"));
        s.push('\n');
    }
    s
}

/// Writes `<out>/<db_id>/` for one database.
pub fn emit_database(
    out: &Path,
    output: &DatabaseOutput,
    diagram: DiagramFormat,
) -> Result<(), OutputError> {
    let dir = out.join(&output.db_id);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write(&dir.join(ANNOTATIONS_FILE), &lines(&output.records))?;
    write(&dir.join(MODEL_FILE), &pretty(&output.model))?;
    write(
        &dir.join(format!("diagram.{}", diagram.extension())),
        &export_diagram(&output.model, diagram),
    )?;
    write(&dir.join(DIAGNOSTICS_FILE), &pretty(&output.diagnostics))?;
    write(
        &dir.join(IE_FILE),
        &lines(&export_ie_format(&output.records, &output.model)),
    )
}

pub fn emit_stats(out: &Path, stats: &CorpusStats) -> Result<(), OutputError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    write(&out.join(STATS_FILE), &pretty(stats))
}

fn parse<T: DeserializeOwned>(
    path: &Path,
    line: Option<usize>,
    text: &str,
) -> Result<T, OutputError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| OutputError::Format {
        path: path.to_path_buf(),
        line,
        field: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

fn read(path: &Path) -> Result<String, OutputError> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>, OutputError> {
    let path = path.as_ref();
    read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse(path, Some(i + 1), l))
        .collect()
}

/// Loads and validates an ER model document.
pub fn load_model(path: impl AsRef<Path>) -> Result<ErModel, OutputError> {
    let path = path.as_ref();
    parse(path, None, &read(path)?)
}

pub fn load_diagnostics(path: impl AsRef<Path>) -> Result<Diagnostics, OutputError> {
    let path = path.as_ref();
    parse(path, None, &read(path)?)
}

pub fn load_stats(path: impl AsRef<Path>) -> Result<CorpusStats, OutputError> {
    let path = path.as_ref();
    parse(path, None, &read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_errors_name_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        fs::write(
            &p,
            r#"{"entities": [{"id": "x", "name": "a"}], "attributes": [], "relationships": []}"#,
        )
        .unwrap();
        let err = load_model(&p).unwrap_err().to_string();
        assert!(err.contains("entities[0].id"), "{err}");

        fs::write(
            &p,
            r#"{"entities": [], "attributes": [{"id": 1, "name": "a", "owner": 0}], "relationships": []}"#,
        )
        .unwrap();
        let err = load_model(&p).unwrap_err().to_string();
        assert!(err.contains("attributes[0].owner"), "{err}");
    }

    #[test]
    fn missing_file_is_reported() {
        let err = load_model("/nonexistent/er_model.json").unwrap_err();
        assert!(err.is_missing_file());
    }

    #[test]
    fn annotation_errors_carry_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.jsonl");
        fs::write(&p, "{}\n").unwrap();
        let err = load_annotations(&p).unwrap_err().to_string();
        assert!(err.contains(":1"), "{err}");
    }
}
