use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nl2erm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn transform(examples: &Path, out: &Path, extra: &[&str]) -> Output {
    let schemas = data("tables.json");
    let mut args = vec![
        "transform",
        "--schemas",
        schemas.to_str().unwrap(),
        "--examples",
        examples.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn transform_fixture_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let o = transform(&data("examples.json"), dir.path(), &[]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).contains("3 models / 18 utterances"));
    for db in ["school", "musical", "concert_singer"] {
        for f in [
            "annotations.jsonl",
            "er_model.json",
            "diagram.dot",
            "diagnostics.json",
            "ie.jsonl",
        ] {
            assert!(dir.path().join(db).join(f).is_file(), "{db}/{f}");
        }
    }
    assert!(dir.path().join("stats.json").is_file());
}

#[test]
fn empty_examples_is_vacuous_success() {
    let dir = tempfile::tempdir().unwrap();
    let examples = dir.path().join("empty.json");
    fs::write(&examples, "[]").unwrap();
    let out = dir.path().join("out");
    let o = transform(&examples, &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    let dbs = fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().is_dir())
        .count();
    assert_eq!(dbs, 0);
    assert!(stdout(&o).contains("0 models / 0 utterances"));
}

#[test]
fn one_malformed_query_in_fifty() {
    let dir = tempfile::tempdir().unwrap();
    let mut pairs: Vec<Value> = (0..50)
        .map(|i| {
            json!({
                "db_id": "concert_singer",
                "question": format!("Which singers are older than {i}?"),
                "query": format!("SELECT Name FROM singer WHERE Age > {i}"),
            })
        })
        .collect();
    pairs[17]["query"] = json!("SELECT Name FROM singer WHERE Age >");
    let examples = dir.path().join("fifty.json");
    fs::write(&examples, serde_json::to_string(&pairs).unwrap()).unwrap();
    let out = dir.path().join("out");
    let o = transform(&examples, &out, &[]);
    assert_eq!(o.status.code(), Some(0));

    let lines = fs::read_to_string(out.join("concert_singer/annotations.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 49);
    let diag: Value = serde_json::from_str(
        &fs::read_to_string(out.join("concert_singer/diagnostics.json")).unwrap(),
    )
    .unwrap();
    let skipped = diag["skipped"].as_array().unwrap();
    assert_eq!(skipped.len(), 1);
    assert_eq!(skipped[0]["index"], 17);
}

#[test]
fn unknown_db_id_in_examples_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let examples = dir.path().join("bad.json");
    fs::write(
        &examples,
        r#"[{"db_id": "nowhere", "question": "q", "query": "SELECT 1"}]"#,
    )
    .unwrap();
    let o = transform(&examples, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_input_file_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = transform(
        &dir.path().join("absent.json"),
        &dir.path().join("out"),
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(run(&["transform"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let o = transform(&data("examples.json"), dir.path(), &["--diagram", "png"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn broken_schema_fails_its_database_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut tables: Value =
        serde_json::from_str(&fs::read_to_string(data("tables.json")).unwrap()).unwrap();
    tables[0]["foreign_keys"] = json!([[1, 999]]);
    let schemas = dir.path().join("tables.json");
    fs::write(&schemas, serde_json::to_string(&tables).unwrap()).unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "transform",
        "--schemas",
        schemas.to_str().unwrap(),
        "--examples",
        data("examples.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(out.join("musical/er_model.json").is_file());
    assert!(!out.join("school").exists());
    let failures: Value =
        serde_json::from_str(&fs::read_to_string(out.join("failures.json")).unwrap()).unwrap();
    assert!(failures.get("school").is_some());
}

fn link(db: &str, utterance: &str, sql: &str, schemas: &Path) -> Output {
    run(&[
        "link",
        "--schemas",
        schemas.to_str().unwrap(),
        "--db-id",
        db,
        "--utterance",
        utterance,
        "--sql",
        sql,
    ])
}

#[test]
fn link_prints_teach_relationship() {
    let o = link(
        "school",
        "Which teachers teach the student named Ann?",
        "SELECT T1.name FROM teacher AS T1 JOIN teach AS T2 ON T1.id = T2.teacher_id \
         JOIN student AS T3 ON T2.student_id = T3.id WHERE T3.name = 'Ann'",
        &data("tables.json"),
    );
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let r_line = text.lines().find(|l| l.starts_with("r: ")).unwrap();
    assert!(r_line.contains("teach(teacher, student)"), "{r_line}");
}

#[test]
fn link_without_matches() {
    let o = link(
        "school",
        "How many rows exist?",
        "SELECT count(*) FROM teacher",
        &data("tables.json"),
    );
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let labels: Vec<&str> = text
        .lines()
        .skip(1)
        .take_while(|l| !l.starts_with("spans:"))
        .map(|l| l.split_whitespace().last().unwrap())
        .collect();
    assert_eq!(labels.len(), 5);
    assert!(labels.iter().all(|l| *l == "Other"));
}

#[test]
fn link_prefers_longer_column_match() {
    let dir = tempfile::tempdir().unwrap();
    let schemas = dir.path().join("tables.json");
    fs::write(
        &schemas,
        json!([{
            "db_id": "singers",
            "table_names_original": ["singer"],
            "table_names": ["singer"],
            "column_names_original": [[-1, "*"], [0, "singer_id"], [0, "singer_name"]],
            "column_names": [[-1, "*"], [0, "singer id"], [0, "singer name"]],
            "column_types": ["text", "number", "text"],
            "foreign_keys": [],
            "primary_keys": [1]
        }])
        .to_string(),
    )
    .unwrap();
    let o = link(
        "singers",
        "What is the singer name of each singer?",
        "SELECT singer_name FROM singer",
        &schemas,
    );
    let text = stdout(&o);
    assert!(
        text.contains("[3..5) \"singer name\" -> Attribute singer.singer_name (Exact"),
        "{text}"
    );
}

#[test]
fn link_unknown_db_id() {
    let o = link("nowhere", "q", "SELECT 1", &data("tables.json"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn link_bad_sql() {
    let o = link("school", "q", "SELECT FROM", &data("tables.json"));
    assert_eq!(o.status.code(), Some(2));
}

fn write_entities(dir: &Path, name: &str, entities: &[&str]) -> PathBuf {
    let doc = json!({
        "entities": entities.iter().enumerate().map(|(i, n)| json!({"id": i, "name": n})).collect::<Vec<_>>(),
        "attributes": [],
        "relationships": [],
    });
    let p = dir.join(name);
    fs::write(&p, doc.to_string()).unwrap();
    p
}

#[test]
fn eval_table_output() {
    let dir = tempfile::tempdir().unwrap();
    let gold = write_entities(dir.path(), "gold.json", &["a", "b", "c"]);
    let pred = write_entities(dir.path(), "pred.json", &["a", "b", "d"]);
    let o = run(&["eval", gold.to_str().unwrap(), gold.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("entity             1.00    1.00    1.00"));
    let o = run(&["eval", gold.to_str().unwrap(), pred.to_str().unwrap()]);
    assert!(stdout(&o).contains("entity             0.67    0.67    0.67"));
    let o = run(&[
        "eval",
        gold.to_str().unwrap(),
        pred.to_str().unwrap(),
        "--json",
    ]);
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["entity"]["missing"], json!(["c"]));
}

#[test]
fn eval_missing_and_invalid_files() {
    let dir = tempfile::tempdir().unwrap();
    let gold = write_entities(dir.path(), "gold.json", &["a"]);
    let o = run(&["eval", gold.to_str().unwrap(), "/nonexistent.json"]);
    assert_eq!(o.status.code(), Some(1));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"entities": [], "attributes": [{"id": 0, "name": "x", "owner": 5}], "relationships": []}"#)
        .unwrap();
    let o = run(&["eval", gold.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("attributes[0].owner"));
}

#[test]
fn export_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    transform(&data("examples.json"), &out, &[]);
    let model = out.join("school/er_model.json");
    let o = run(&["export", model.to_str().unwrap(), "--format", "dot"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("label=\"teach\""));

    let empty = write_entities(dir.path(), "empty.json", &[]);
    let o = run(&["export", empty.to_str().unwrap(), "--format", "mermaid"]);
    assert_eq!(stdout(&o), "flowchart LR\n");
    let o = run(&["export", empty.to_str().unwrap(), "--format", "svg"]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["stats", out.to_str().unwrap(), "--json"]);
    let s: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let written: Value =
        serde_json::from_str(&fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    assert_eq!(s, written);
    assert_eq!(s["models"], 3);
}

#[test]
fn oracle_on_fixture_without_parsed_sql() {
    let o = run(&[
        "oracle",
        "--schemas",
        data("tables.json").to_str().unwrap(),
        "--examples",
        data("examples.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("compared 0"));
}
