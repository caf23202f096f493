//! Cross-check of extracted references against a corpus's pre-parsed SQL.
//!
//! Spider ships every query alongside a nested JSON rendering (`"sql"`)
//! whose table units hold table ordinals and whose column units hold
//! corpus-wide column numbers. Walking it gives an independent reading of
//! which tables and columns a query touches.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;
use serde_json::Value;

use super::{extract_references, SqlReferenceSet};
use crate::ingest::ExamplePair;
use crate::model::{ColumnRef, DatabaseSchema};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StructuredReferences {
    pub tables: BTreeSet<usize>,
    pub columns: BTreeSet<ColumnRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleReport {
    pub tables_agree: bool,
    pub columns_agree: bool,
    pub expected: StructuredReferences,
    pub extracted_tables: BTreeSet<usize>,
    pub extracted_columns: BTreeSet<ColumnRef>,
}

/// Compares `refs` against the references read out of `parsed_sql`.
pub fn oracle_compare(
    refs: &SqlReferenceSet,
    parsed_sql: &Value,
    schema: &DatabaseSchema,
) -> OracleReport {
    let expected = structured_references(parsed_sql, schema);
    OracleReport {
        tables_agree: expected.tables == refs.tables,
        columns_agree: expected.columns == refs.columns,
        expected,
        extracted_tables: refs.tables.clone(),
        extracted_columns: refs.columns.clone(),
    }
}

/// Reads tables and columns out of a pre-parsed query. Unknown shapes are
/// skipped rather than rejected.
pub fn structured_references(parsed_sql: &Value, schema: &DatabaseSchema) -> StructuredReferences {
    let mut out = StructuredReferences::default();
    walk_sql(parsed_sql, schema, &mut out);
    out
}

fn walk_sql(sql: &Value, schema: &DatabaseSchema, out: &mut StructuredReferences) {
    let Value::Object(map) = sql else {
        return;
    };
    if let Some(from) = map.get("from") {
        if let Some(units) = from.get("table_units").and_then(Value::as_array) {
            for unit in units {
                let Some([kind, body]) = unit.as_array().map(Vec::as_slice) else {
                    continue;
                };
                match kind.as_str() {
                    Some("table_unit") => {
                        if let Some(t) = body.as_u64() {
                            out.tables.insert(t as usize);
                        }
                    }
                    Some("sql") => walk_sql(body, schema, out),
                    _ => {}
                }
            }
        }
        if let Some(conds) = from.get("conds") {
            walk_conds(conds, schema, out);
        }
    }
    if let Some(select) = map.get("select").and_then(Value::as_array) {
        if let Some(items) = select.get(1).and_then(Value::as_array) {
            for item in items {
                if let Some(val_unit) = item.as_array().and_then(|a| a.get(1)) {
                    walk_val_unit(val_unit, schema, out);
                }
            }
        }
    }
    for key in ["where", "having"] {
        if let Some(conds) = map.get(key) {
            walk_conds(conds, schema, out);
        }
    }
    if let Some(group) = map.get("groupBy").and_then(Value::as_array) {
        for col_unit in group {
            walk_col_unit(col_unit, schema, out);
        }
    }
    if let Some(order) = map.get("orderBy").and_then(Value::as_array) {
        if let Some(units) = order.get(1).and_then(Value::as_array) {
            for val_unit in units {
                walk_val_unit(val_unit, schema, out);
            }
        }
    }
    for key in ["intersect", "union", "except"] {
        if let Some(nested) = map.get(key) {
            walk_sql(nested, schema, out);
        }
    }
}

/// Condition lists alternate cond units with "and"/"or" strings.
fn walk_conds(conds: &Value, schema: &DatabaseSchema, out: &mut StructuredReferences) {
    let Some(items) = conds.as_array() else {
        return;
    };
    for item in items {
        let Some(cond) = item.as_array() else {
            continue;
        };
        // [not_op, op_id, val_unit, val1, val2]
        if let Some(val_unit) = cond.get(2) {
            walk_val_unit(val_unit, schema, out);
        }
        for val in cond.iter().skip(3) {
            walk_value(val, schema, out);
        }
    }
}

fn walk_value(val: &Value, schema: &DatabaseSchema, out: &mut StructuredReferences) {
    match val {
        Value::Object(_) => walk_sql(val, schema, out),
        Value::Array(_) => walk_col_unit(val, schema, out),
        _ => {}
    }
}

/// [unit_op, col_unit, col_unit | null]
fn walk_val_unit(val_unit: &Value, schema: &DatabaseSchema, out: &mut StructuredReferences) {
    let Some(parts) = val_unit.as_array() else {
        return;
    };
    for col_unit in parts.iter().skip(1) {
        walk_col_unit(col_unit, schema, out);
    }
}

/// [agg_id, column_number, distinct]
fn walk_col_unit(col_unit: &Value, schema: &DatabaseSchema, out: &mut StructuredReferences) {
    let Some(parts) = col_unit.as_array() else {
        return;
    };
    if let Some(c) = parts.get(1).and_then(Value::as_u64) {
        if let Some(r) = schema.source_column(c as usize) {
            out.columns.insert(r);
        }
    }
}

/// One pair whose extraction disagreed with the pre-parsed query, or could
/// not be extracted at all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleDisagreement {
    pub index: usize,
    pub db_id: String,
    pub sql: String,
    pub error: Option<String>,
    pub expected_tables: Vec<String>,
    pub extracted_tables: Vec<String>,
    pub expected_columns: Vec<String>,
    pub extracted_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSweep {
    /// Pairs that carried a pre-parsed query.
    pub compared: usize,
    pub tables_agree: usize,
    pub columns_agree: usize,
    pub table_agreement: f64,
    pub column_agreement: f64,
    pub disagreements: Vec<OracleDisagreement>,
}

/// Runs [`oracle_compare`] over many pairs. Pairs without a pre-parsed
/// query or without a known schema are not counted.
pub fn oracle_sweep<'a>(
    pairs: impl IntoIterator<Item = &'a ExamplePair>,
    schemas: &HashMap<&str, &DatabaseSchema>,
) -> OracleSweep {
    let mut sweep = OracleSweep {
        compared: 0,
        tables_agree: 0,
        columns_agree: 0,
        table_agreement: 0.0,
        column_agreement: 0.0,
        disagreements: Vec::new(),
    };
    for pair in pairs {
        let (Some(parsed), Some(schema)) = (&pair.parsed_sql, schemas.get(pair.db_id.as_str()))
        else {
            continue;
        };
        sweep.compared += 1;
        let tables = |set: &BTreeSet<usize>| {
            set.iter()
                .map(|&t| schema.tables()[t].name.original.clone())
                .collect::<Vec<_>>()
        };
        let columns = |set: &BTreeSet<ColumnRef>| {
            set.iter()
                .map(|&c| {
                    format!(
                        "{}.{}",
                        schema.tables()[c.table].name.original,
                        schema
                            .column(c)
                            .map(|d| d.name.original.as_str())
                            .unwrap_or("?")
                    )
                })
                .collect::<Vec<_>>()
        };
        let expected = structured_references(parsed, schema);
        match extract_references(&pair.sql_text, schema) {
            Ok(refs) => {
                let report = oracle_compare(&refs, parsed, schema);
                sweep.tables_agree += usize::from(report.tables_agree);
                sweep.columns_agree += usize::from(report.columns_agree);
                if !report.tables_agree || !report.columns_agree {
                    sweep.disagreements.push(OracleDisagreement {
                        index: pair.index,
                        db_id: pair.db_id.clone(),
                        sql: pair.sql_text.clone(),
                        error: None,
                        expected_tables: tables(&expected.tables),
                        extracted_tables: tables(&refs.tables),
                        expected_columns: columns(&expected.columns),
                        extracted_columns: columns(&refs.columns),
                    });
                }
            }
            Err(e) => sweep.disagreements.push(OracleDisagreement {
                index: pair.index,
                db_id: pair.db_id.clone(),
                sql: pair.sql_text.clone(),
                error: Some(e.to_string()),
                expected_tables: tables(&expected.tables),
                extracted_tables: Vec::new(),
                expected_columns: columns(&expected.columns),
                extracted_columns: Vec::new(),
            }),
        }
    }
    if sweep.compared > 0 {
        sweep.table_agreement = sweep.tables_agree as f64 / sweep.compared as f64;
        sweep.column_agreement = sweep.columns_agree as f64 / sweep.compared as f64;
    }
    sweep
}
