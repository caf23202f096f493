//! From per-utterance annotations to the final ER model and the files
//! that make up a dataset.

mod export;
mod io;
mod stats;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use export::{
    export_diagram, export_ie_format, DiagramFormat, IeMention, IeRecord, IeRelation,
};
pub use io::{
    emit_database, emit_stats, load_annotations, load_diagnostics, load_model, load_stats,
    OutputError, ANNOTATIONS_FILE, DIAGNOSTICS_FILE, IE_FILE, MODEL_FILE, STATS_FILE,
};
pub use stats::{stats, CorpusStats};

use crate::ingest::ExamplePair;
use crate::link::{AnnotatedUtterance, Linker};
use crate::model::{
    DatabaseSchema, ElementId, ErAttribute, ErEntity, ErModel, ErRelationship, ModelError,
    Provenance, RelKind,
};
use crate::sql::extract_references;
use crate::transform::{transform_schema, RawEr, TransformError};

#[derive(Debug, Error)]
pub enum PruneError {
    #[error("annotation {index}: {id} is not an entity of the raw model")]
    NotAnEntity { index: usize, id: ElementId },
    #[error("annotation {index}: {id} is not an attribute of the raw model")]
    NotAnAttribute { index: usize, id: ElementId },
    #[error("annotation {index}: {id} is not a relationship of the raw model")]
    NotARelationship { index: usize, id: ElementId },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Keeps the elements named by at least one annotation, then restores
/// well-formedness. Elements added only by the repair are marked inferred.
pub fn prune<'a>(
    raw: &ErModel,
    annotations: impl IntoIterator<Item = &'a AnnotatedUtterance>,
) -> Result<ErModel, PruneError> {
    let mut entities = BTreeSet::new();
    let mut attributes = BTreeSet::new();
    let mut relationships = BTreeSet::new();
    for (index, ann) in annotations.into_iter().enumerate() {
        for &id in &ann.entities {
            raw.entity(id)
                .ok_or(PruneError::NotAnEntity { index, id })?;
            entities.insert(id);
        }
        for &id in &ann.attributes {
            raw.attribute(id)
                .ok_or(PruneError::NotAnAttribute { index, id })?;
            attributes.insert(id);
        }
        for &id in &ann.relationships {
            raw.relationship(id)
                .ok_or(PruneError::NotARelationship { index, id })?;
            relationships.insert(id);
        }
    }

    let mut inferred = BTreeSet::new();
    let add = |set: &mut BTreeSet<ElementId>, id: ElementId, inferred: &mut BTreeSet<ElementId>| {
        if set.insert(id) {
            inferred.insert(id);
        }
    };
    for &r in &relationships.clone() {
        let rel = raw.relationship(r).expect("checked above");
        match rel.kind {
            RelKind::EntityEntity => {
                add(&mut entities, rel.endpoints.0, &mut inferred);
                add(&mut entities, rel.endpoints.1, &mut inferred);
            }
            RelKind::EntityAttribute => add(&mut attributes, rel.endpoints.1, &mut inferred),
        }
    }
    for &a in &attributes.clone() {
        let attr = raw.attribute(a).expect("checked above");
        add(&mut entities, attr.owner, &mut inferred);
        if let Some(c) = raw.containment_of(a) {
            add(&mut relationships, c.id, &mut inferred);
        }
    }

    let entities = entities
        .iter()
        .map(|&id| ErEntity {
            inferred: inferred.contains(&id),
            ..raw
                .entity(id)
                .expect("kept ids come from the raw model")
                .clone()
        })
        .collect();
    let attributes = attributes
        .iter()
        .map(|&id| ErAttribute {
            inferred: inferred.contains(&id),
            ..raw
                .attribute(id)
                .expect("kept ids come from the raw model")
                .clone()
        })
        .collect();
    let relationships = relationships
        .iter()
        .map(|&id| ErRelationship {
            inferred: inferred.contains(&id),
            ..raw
                .relationship(id)
                .expect("kept ids come from the raw model")
                .clone()
        })
        .collect();
    Ok(ErModel::new(entities, attributes, relationships)?)
}

/// One line of `annotations.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    /// Position of the pair in the examples file.
    pub index: usize,
    pub db_id: String,
    pub utterance: String,
    pub sql: String,
    #[serde(flatten)]
    pub annotation: AnnotatedUtterance,
}

/// A pair left out of the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub index: usize,
    pub utterance: String,
    pub sql: String,
    pub error: String,
}

/// An entity-entity relationship whose endpoints both survived pruning but
/// which no query witnessed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedRelationship {
    pub id: ElementId,
    pub name: String,
    pub provenance: Provenance,
    pub endpoints: (String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTableConflict {
    pub table: String,
    pub target: String,
    pub dropped: String,
}

/// Everything worth knowing about a database that is not in the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub db_id: String,
    pub relation_tables: Vec<String>,
    pub relation_table_conflicts: Vec<RelationTableConflict>,
    pub skipped: Vec<SkippedPair>,
    pub dropped_relationships: Vec<DroppedRelationship>,
}

/// The processed form of one database.
#[derive(Debug, Clone)]
pub struct DatabaseOutput {
    pub db_id: String,
    pub raw: RawEr,
    pub records: Vec<AnnotationRecord>,
    pub model: ErModel,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("{db_id}: {source}")]
    Prune {
        db_id: String,
        #[source]
        source: PruneError,
    },
}

/// Runs extraction, linking and pruning over the pairs of one database.
/// A pair whose query cannot be resolved is recorded in the diagnostics
/// and skipped.
pub fn process_database(
    schema: &DatabaseSchema,
    pairs: &[&ExamplePair],
    linker: &Linker,
) -> Result<DatabaseOutput, ProcessError> {
    let (raw, relation) = transform_schema(schema)?;
    let table_name = |t: usize| schema.tables()[t].name.original.clone();
    let mut diagnostics = Diagnostics {
        db_id: schema.db_id().to_string(),
        relation_tables: relation.tables.iter().map(|&t| table_name(t)).collect(),
        relation_table_conflicts: relation
            .conflicts
            .iter()
            .map(|c| RelationTableConflict {
                table: table_name(c.table),
                target: table_name(c.target),
                dropped: table_name(c.dropped),
            })
            .collect(),
        ..Diagnostics::default()
    };

    let mut records = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let refs = match extract_references(&pair.sql_text, schema) {
            Ok(refs) => refs,
            Err(e) => {
                diagnostics.skipped.push(SkippedPair {
                    index: pair.index,
                    utterance: pair.utterance.clone(),
                    sql: pair.sql_text.clone(),
                    error: e.to_string(),
                });
                continue;
            }
        };
        let annotation = linker.annotate(
            &pair.utterance,
            pair.utterance_tokens.as_deref(),
            &refs,
            &raw,
            schema,
        );
        records.push(AnnotationRecord {
            index: pair.index,
            db_id: pair.db_id.clone(),
            utterance: pair.utterance.clone(),
            sql: pair.sql_text.clone(),
            annotation,
        });
    }

    let model = prune(&raw.model, records.iter().map(|r| &r.annotation)).map_err(|source| {
        ProcessError::Prune {
            db_id: schema.db_id().to_string(),
            source,
        }
    })?;
    diagnostics.dropped_relationships = dropped_relationships(&raw.model, &model);
    Ok(DatabaseOutput {
        db_id: schema.db_id().to_string(),
        raw,
        records,
        model,
        diagnostics,
    })
}

fn dropped_relationships(raw: &ErModel, kept: &ErModel) -> Vec<DroppedRelationship> {
    let name = |id: ElementId| {
        raw.name_of(id)
            .map(|n| n.original.clone())
            .unwrap_or_default()
    };
    raw.relationships()
        .filter(|r| r.kind == RelKind::EntityEntity && kept.relationship(r.id).is_none())
        .filter(|r| kept.entity(r.endpoints.0).is_some() && kept.entity(r.endpoints.1).is_some())
        .map(|r| DroppedRelationship {
            id: r.id,
            name: r.name.original.clone(),
            provenance: r.provenance,
            endpoints: (name(r.endpoints.0), name(r.endpoints.1)),
        })
        .collect()
}

/// Groups pairs by database, keeping file order within each group.
pub fn group_by_db(pairs: &[ExamplePair]) -> BTreeMap<&str, Vec<&ExamplePair>> {
    let mut out: BTreeMap<&str, Vec<&ExamplePair>> = BTreeMap::new();
    for pair in pairs {
        out.entry(pair.db_id.as_str()).or_default().push(pair);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{Label, Token};
    use crate::model::{ColumnDef, ColumnRef, ForeignKey, TableDef};

    fn actor_db() -> DatabaseSchema {
        let t = |name: &str, cols: &[&str]| {
            TableDef::new(
                name,
                cols.iter().map(|c| ColumnDef::new(c, "text")).collect(),
            )
        };
        DatabaseSchema::new(
            "musical",
            vec![
                t("musical", &["musical_id", "name", "nominee"]),
                t("actor", &["actor_id", "name", "musical_id", "age"]),
            ],
            vec![ForeignKey {
                from: ColumnRef::new(1, 2),
                to: ColumnRef::new(0, 0),
            }],
            vec![],
        )
        .unwrap()
    }

    fn pair(index: usize, utterance: &str, sql: &str) -> ExamplePair {
        ExamplePair {
            index,
            db_id: "musical".into(),
            utterance: utterance.into(),
            utterance_tokens: None,
            sql_text: sql.into(),
            parsed_sql: None,
        }
    }

    fn bare(entities: &[u32], attributes: &[u32], relationships: &[u32]) -> AnnotatedUtterance {
        let ids = |xs: &[u32]| xs.iter().map(|&x| ElementId(x)).collect();
        AnnotatedUtterance {
            tokens: vec![Token {
                text: "x".into(),
                norm: vec!["x".into()],
            }],
            labels: vec![Label::Other],
            spans: vec![],
            entities: ids(entities),
            attributes: ids(attributes),
            relationships: ids(relationships),
        }
    }

    #[test]
    fn empty_annotations_give_empty_model() {
        let (raw, _) = transform_schema(&actor_db()).unwrap();
        assert!(prune(&raw.model, []).unwrap().is_empty());
        assert!(prune(&raw.model, [&bare(&[], &[], &[])])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn orphan_attribute_pulls_in_owner() {
        let s = actor_db();
        let (raw, _) = transform_schema(&s).unwrap();
        let name = raw.mapping.attribute_of(ColumnRef::new(1, 1)).unwrap();
        let actor = raw.mapping.entity_of(1).unwrap();
        let model = prune(&raw.model, [&bare(&[], &[name.0], &[])]).unwrap();
        assert_eq!(model.entities().count(), 1);
        assert!(model.entity(actor).unwrap().inferred);
        assert!(!model.attribute(name).unwrap().inferred);
        let c = model.containment_of(name).unwrap();
        assert!(c.inferred);
        assert_eq!(model.len(), 3);
    }

    #[test]
    fn unknown_id_is_rejected() {
        let (raw, _) = transform_schema(&actor_db()).unwrap();
        let err = prune(&raw.model, [&bare(&[999], &[], &[])]).unwrap_err();
        assert!(matches!(err, PruneError::NotAnEntity { index: 0, .. }));
        let err = prune(&raw.model, [&bare(&[], &[0], &[])]).unwrap_err();
        assert!(matches!(err, PruneError::NotAnAttribute { .. }));
    }

    #[test]
    fn unused_columns_are_pruned() {
        let s = actor_db();
        let pairs = [
            pair(0, "What are the names of actors?", "SELECT name FROM actor"),
            pair(
                1,
                "Show the nominee of each musical.",
                "SELECT Nominee FROM musical",
            ),
        ];
        let refs: Vec<&ExamplePair> = pairs.iter().collect();
        let out = process_database(&s, &refs, &Linker::default()).unwrap();
        let age = out.raw.mapping.attribute_of(ColumnRef::new(1, 3)).unwrap();
        assert!(out.model.attribute(age).is_none());
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.model.entities().count(), 2);
        assert_eq!(out.model.attributes().count(), 2);
        assert_eq!(out.diagnostics.dropped_relationships.len(), 1);
    }

    #[test]
    fn bad_query_is_skipped() {
        let s = actor_db();
        let pairs = [
            pair(0, "How many actors?", "SELECT count(*) FROM actor"),
            pair(1, "Broken", "SELECT FROM WHERE"),
            pair(2, "Unknown table", "SELECT * FROM director"),
        ];
        let refs: Vec<&ExamplePair> = pairs.iter().collect();
        let out = process_database(&s, &refs, &Linker::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(
            out.diagnostics
                .skipped
                .iter()
                .map(|p| p.index)
                .collect::<Vec<_>>(),
            [1, 2]
        );
    }

    #[test]
    fn record_json_round_trip() {
        let s = actor_db();
        let pairs = [pair(
            4,
            "List each actor's name and age.",
            "SELECT name, age FROM actor",
        )];
        let refs: Vec<&ExamplePair> = pairs.iter().collect();
        let out = process_database(&s, &refs, &Linker::default()).unwrap();
        let line = serde_json::to_string(&out.records[0]).unwrap();
        let back: AnnotationRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, out.records[0]);
    }
}
