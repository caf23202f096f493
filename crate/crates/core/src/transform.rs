//! Database schema to raw ER model.
//!
//! Tables become entities, columns become attributes, and foreign keys
//! become entity-entity relationships. The exception is the junction
//! table of a many-to-many relationship: a small table whose columns are
//! (almost) all foreign keys. Such a *relation table* becomes a single
//! relationship between the two tables it references and contributes no
//! entity or attributes of its own.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    ColumnRef, DatabaseSchema, ElementId, ErAttribute, ErEntity, ErModel, ErRelationship,
    ModelError, Provenance,
};

/// Largest column count a relation table may have: two foreign keys plus
/// an optional surrogate key.
pub const MAX_RELATION_TABLE_COLUMNS: usize = 3;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("{db_id}: relation table {table:?} references relation table {target:?}")]
    NestedRelationTable {
        db_id: String,
        table: String,
        target: String,
    },
    #[error("{db_id}: {index} is not a relation table candidate")]
    NotARelationTable { db_id: String, index: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A conflict the relation-table fixed point had to break.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelationConflict {
    /// Candidate that references another candidate.
    pub table: usize,
    pub target: usize,
    /// The candidate dropped to resolve it.
    pub dropped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelationTables {
    pub tables: BTreeSet<usize>,
    pub conflicts: Vec<RelationConflict>,
}

/// The referencing columns of `table` in column order, each with the table
/// its first foreign key points at.
fn fk_targets(schema: &DatabaseSchema, table: usize) -> BTreeMap<usize, usize> {
    let mut out = BTreeMap::new();
    for fk in schema.foreign_keys() {
        if fk.from.table == table {
            out.entry(fk.from.column).or_insert(fk.to.table);
        }
    }
    out
}

fn is_candidate(schema: &DatabaseSchema, table: usize) -> bool {
    schema.tables()[table].columns.len() <= MAX_RELATION_TABLE_COLUMNS
        && fk_targets(schema, table).len() == 2
}

/// The two tables a relation-table candidate links, in column order.
pub fn relation_endpoints(schema: &DatabaseSchema, table: usize) -> Option<(usize, usize)> {
    let targets = fk_targets(schema, table);
    if targets.len() != 2 {
        return None;
    }
    let mut it = targets.values().copied();
    Some((it.next()?, it.next()?))
}

/// Finds the relation tables of `schema`.
///
/// A table qualifies when it has at most three columns and exactly two of
/// them are foreign-key columns, and neither table it references is itself
/// a relation table. Candidates that reference each other are resolved by
/// repeatedly dropping one side of the lowest-numbered conflict, keeping
/// the candidate with fewer columns (lower index on ties).
pub fn detect_relation_tables(schema: &DatabaseSchema) -> RelationTables {
    let mut set: BTreeSet<usize> = (0..schema.tables().len())
        .filter(|&t| is_candidate(schema, t))
        .collect();
    let mut conflicts = Vec::new();
    loop {
        let conflict = set.iter().find_map(|&t| {
            let (a, b) = relation_endpoints(schema, t)?;
            [a, b].into_iter().find(|x| set.contains(x)).map(|x| (t, x))
        });
        let Some((table, target)) = conflict else {
            break;
        };
        let dropped = if table == target {
            table
        } else {
            let width = |t: usize| schema.tables()[t].columns.len();
            let keep = if (width(table), table) <= (width(target), target) {
                table
            } else {
                target
            };
            if keep == table {
                target
            } else {
                table
            }
        };
        set.remove(&dropped);
        conflicts.push(RelationConflict {
            table,
            target,
            dropped,
        });
    }
    RelationTables {
        tables: set,
        conflicts,
    }
}

/// Where each schema element landed in the raw model.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchemaMapping {
    /// Entity per table; `None` for relation tables.
    pub table_entity: Vec<Option<ElementId>>,
    pub column_attribute: BTreeMap<ColumnRef, ElementId>,
    pub attribute_containment: BTreeMap<ElementId, ElementId>,
    /// Foreign-key relationships with the two tables they join.
    pub foreign_key_relationships: Vec<(ElementId, usize, usize)>,
    /// Relation-table relationships: (relationship, relation table, endpoint tables).
    pub relation_table_relationships: Vec<(ElementId, usize, (usize, usize))>,
    pub relation_tables: BTreeSet<usize>,
}

impl SchemaMapping {
    pub fn entity_of(&self, table: usize) -> Option<ElementId> {
        self.table_entity.get(table).copied().flatten()
    }

    pub fn attribute_of(&self, column: ColumnRef) -> Option<ElementId> {
        self.column_attribute.get(&column).copied()
    }
}

/// A raw model plus the bookkeeping that ties it back to its schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEr {
    pub model: ErModel,
    pub mapping: SchemaMapping,
}

/// Converts a schema into its raw ER model. Ids are assigned in a fixed
/// order (entities, attributes, containments, foreign keys, relation
/// tables), each in schema order.
pub fn schema_to_raw_er(
    schema: &DatabaseSchema,
    relation_tables: &BTreeSet<usize>,
) -> Result<RawEr, TransformError> {
    let mut next = 0u32;
    let mut fresh = || {
        let id = ElementId(next);
        next += 1;
        id
    };

    let mut endpoints = BTreeMap::new();
    for &t in relation_tables {
        let (a, b) = relation_endpoints(schema, t).ok_or(TransformError::NotARelationTable {
            db_id: schema.db_id().to_string(),
            index: t,
        })?;
        for target in [a, b] {
            if relation_tables.contains(&target) {
                return Err(TransformError::NestedRelationTable {
                    db_id: schema.db_id().to_string(),
                    table: schema.tables()[t].name.original.clone(),
                    target: schema.tables()[target].name.original.clone(),
                });
            }
        }
        endpoints.insert(t, (a, b));
    }

    let mut mapping = SchemaMapping {
        relation_tables: relation_tables.clone(),
        ..SchemaMapping::default()
    };
    let mut entities = Vec::new();
    for (t, table) in schema.tables().iter().enumerate() {
        if relation_tables.contains(&t) {
            mapping.table_entity.push(None);
            continue;
        }
        let id = fresh();
        mapping.table_entity.push(Some(id));
        entities.push(ErEntity {
            id,
            name: table.name.clone(),
            inferred: false,
        });
    }

    let mut attributes = Vec::new();
    for (t, table) in schema.tables().iter().enumerate() {
        let Some(owner) = mapping.table_entity[t] else {
            continue;
        };
        for (c, column) in table.columns.iter().enumerate() {
            let id = fresh();
            mapping.column_attribute.insert(ColumnRef::new(t, c), id);
            attributes.push(ErAttribute {
                id,
                name: column.name.clone(),
                owner,
                inferred: false,
            });
        }
    }

    let mut relationships = Vec::new();
    for attr in &attributes {
        let id = fresh();
        mapping.attribute_containment.insert(attr.id, id);
        relationships.push(ErRelationship {
            id,
            kind: Provenance::Containment.kind(),
            endpoints: (attr.owner, attr.id),
            name: attr.name.clone(),
            provenance: Provenance::Containment,
            inferred: false,
        });
    }

    for fk in schema.foreign_keys() {
        let (Some(from), Some(to)) = (
            mapping.entity_of(fk.from.table),
            mapping.entity_of(fk.to.table),
        ) else {
            continue;
        };
        let id = fresh();
        mapping
            .foreign_key_relationships
            .push((id, fk.from.table, fk.to.table));
        relationships.push(ErRelationship {
            id,
            kind: Provenance::ForeignKey.kind(),
            endpoints: (from, to),
            name: schema
                .column(fk.from)
                .expect("validated schema")
                .name
                .clone(),
            provenance: Provenance::ForeignKey,
            inferred: false,
        });
    }

    for (&t, &(a, b)) in &endpoints {
        let id = fresh();
        mapping.relation_table_relationships.push((id, t, (a, b)));
        relationships.push(ErRelationship {
            id,
            kind: Provenance::RelationTable.kind(),
            endpoints: (
                mapping
                    .entity_of(a)
                    .expect("endpoint is not a relation table"),
                mapping
                    .entity_of(b)
                    .expect("endpoint is not a relation table"),
            ),
            name: schema.tables()[t].name.clone(),
            provenance: Provenance::RelationTable,
            inferred: false,
        });
    }

    Ok(RawEr {
        model: ErModel::new(entities, attributes, relationships)?,
        mapping,
    })
}

/// Detection followed by conversion.
pub fn transform_schema(
    schema: &DatabaseSchema,
) -> Result<(RawEr, RelationTables), TransformError> {
    let relation = detect_relation_tables(schema);
    let raw = schema_to_raw_er(schema, &relation.tables)?;
    Ok((raw, relation))
}
