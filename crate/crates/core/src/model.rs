//! Shared schema and ER-model types.
//!
//! Everything here is immutable once built. Constructors validate their
//! invariants and hand back a typed error naming the offending field.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Words whose plural form the suffix rules get wrong.
const DEFAULT_EXCEPTIONS: &[(&str, &str)] = &[
    ("buses", "bus"),
    ("cookies", "cookie"),
    ("does", "do"),
    ("goes", "go"),
    ("ids", "id"),
    ("movies", "movie"),
    ("news", "news"),
    ("series", "series"),
    ("species", "species"),
];

/// Splits names into lowercase tokens and reduces each to a lemma.
///
/// The lemmatizer is a handful of plural-stripping suffix rules plus an
/// exception table. It never looks at context, so the same word always
/// gets the same lemma.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalizer {
    lemmatize: bool,
    exceptions: BTreeMap<String, String>,
}

impl Default for Normalizer {
    fn default() -> Self {
        Self {
            lemmatize: true,
            exceptions: DEFAULT_EXCEPTIONS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

impl Normalizer {
    /// Lowercase-and-split only; no suffix stripping or exceptions.
    pub fn without_lemmatization() -> Self {
        Self {
            lemmatize: false,
            exceptions: BTreeMap::new(),
        }
    }

    /// Adds (or overrides) exception entries. Keys and values are lowercased.
    pub fn with_exceptions<I, K, V>(mut self, entries: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in entries {
            self.exceptions
                .insert(k.as_ref().to_lowercase(), v.as_ref().to_lowercase());
        }
        self
    }

    pub fn lemmatizes(&self) -> bool {
        self.lemmatize
    }

    pub fn normalize(&self, original: &str) -> NameForm {
        NameForm {
            original: original.to_string(),
            norm_tokens: self.tokens(original),
        }
    }

    /// Normalized tokens of `text` without keeping the original around.
    pub fn tokens(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut current = String::new();
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                current.extend(ch.to_lowercase());
            } else if !current.is_empty() {
                out.push(self.lemma(&current));
                current.clear();
            }
        }
        if !current.is_empty() {
            out.push(self.lemma(&current));
        }
        out
    }

    /// Lemma of a single lowercase word.
    pub fn lemma(&self, word: &str) -> String {
        if !self.lemmatize {
            return word.to_string();
        }
        if let Some(mapped) = self.exceptions.get(word) {
            return mapped.clone();
        }
        if word.chars().count() <= 3 {
            return word.to_string();
        }
        if let Some(stem) = word.strip_suffix("ies") {
            return format!("{stem}y");
        }
        if word.ends_with("sses") {
            return word[..word.len() - 2].to_string();
        }
        for suffix in ["xes", "ches", "shes", "zzes"] {
            if word.ends_with(suffix) {
                return word[..word.len() - 2].to_string();
            }
        }
        if word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
            return word.to_string();
        }
        match word.strip_suffix('s') {
            Some(stem) => stem.to_string(),
            None => word.to_string(),
        }
    }
}

fn default_normalizer() -> &'static Normalizer {
    static DEFAULT: OnceLock<Normalizer> = OnceLock::new();
    DEFAULT.get_or_init(Normalizer::default)
}

/// Normalizes with the default rule set.
pub fn normalize_name(original: &str) -> NameForm {
    default_normalizer().normalize(original)
}

/// A name as written in the source, paired with its normalized tokens.
///
/// Serializes as the original string; the tokens are recomputed with the
/// default normalizer on the way back in.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NameForm {
    pub original: String,
    pub norm_tokens: Vec<String>,
}

impl NameForm {
    /// Normalized tokens joined by single spaces.
    pub fn key(&self) -> String {
        self.norm_tokens.join(" ")
    }

    pub fn is_matchable(&self) -> bool {
        !self.norm_tokens.is_empty()
    }
}

impl fmt::Display for NameForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.original)
    }
}

impl From<&str> for NameForm {
    fn from(s: &str) -> Self {
        normalize_name(s)
    }
}

impl Serialize for NameForm {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.original)
    }
}

impl<'de> Deserialize<'de> for NameForm {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(normalize_name(&s))
    }
}

// ---------------------------------------------------------------------------
// Database schemas

/// Position of a column: table ordinal, then column ordinal within the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: usize,
    pub column: usize,
}

impl ColumnRef {
    pub fn new(table: usize, column: usize) -> Self {
        Self { table, column }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDef {
    pub name: NameForm,
    /// Human-readable name, when the corpus ships one.
    pub alias: Option<NameForm>,
    pub value_type: String,
}

impl ColumnDef {
    pub fn new(name: &str, value_type: &str) -> Self {
        Self {
            name: normalize_name(name),
            alias: None,
            value_type: value_type.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableDef {
    pub name: NameForm,
    pub alias: Option<NameForm>,
    pub columns: Vec<ColumnDef>,
}

impl TableDef {
    pub fn new(name: &str, columns: Vec<ColumnDef>) -> Self {
        Self {
            name: normalize_name(name),
            alias: None,
            columns,
        }
    }

    /// Column ordinal by case-insensitive original name.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.name.original.eq_ignore_ascii_case(name))
    }
}

/// `from` references `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ForeignKey {
    pub from: ColumnRef,
    pub to: ColumnRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("{db_id}: {field} refers to column ({table}, {column}), which does not exist")]
    ColumnOutOfRange {
        db_id: String,
        field: String,
        table: usize,
        column: usize,
    },
    #[error("{db_id}: primary key ({table}, {column}) listed twice")]
    DuplicatePrimaryKey {
        db_id: String,
        table: usize,
        column: usize,
    },
    #[error("{db_id}: foreign_keys[{index}] references itself")]
    SelfReferentialForeignKey { db_id: String, index: usize },
    #[error("{db_id}: table {table:?} has two columns normalizing to {column:?}")]
    DuplicateColumn {
        db_id: String,
        table: String,
        column: String,
    },
}

/// Tables, columns and keys of one source database.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatabaseSchema {
    db_id: String,
    tables: Vec<TableDef>,
    foreign_keys: Vec<ForeignKey>,
    primary_keys: Vec<ColumnRef>,
    // Corpus-wide column numbering; slot 0 is conventionally "*".
    source_columns: Vec<Option<ColumnRef>>,
}

impl DatabaseSchema {
    pub fn new(
        db_id: impl Into<String>,
        tables: Vec<TableDef>,
        foreign_keys: Vec<ForeignKey>,
        primary_keys: Vec<ColumnRef>,
    ) -> Result<Self, SchemaError> {
        let db_id = db_id.into();
        let mut source_columns = vec![None];
        for (t, table) in tables.iter().enumerate() {
            source_columns.extend((0..table.columns.len()).map(|c| Some(ColumnRef::new(t, c))));
        }
        let schema = Self {
            db_id,
            tables,
            foreign_keys,
            primary_keys,
            source_columns,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Replaces the corpus-wide column numbering used by pre-parsed SQL.
    pub fn with_source_columns(mut self, source_columns: Vec<Option<ColumnRef>>) -> Self {
        self.source_columns = source_columns;
        self
    }

    fn validate(&self) -> Result<(), SchemaError> {
        let in_range = |field: String, r: ColumnRef| -> Result<(), SchemaError> {
            let ok = self
                .tables
                .get(r.table)
                .is_some_and(|t| r.column < t.columns.len());
            if ok {
                Ok(())
            } else {
                Err(SchemaError::ColumnOutOfRange {
                    db_id: self.db_id.clone(),
                    field,
                    table: r.table,
                    column: r.column,
                })
            }
        };
        for (i, fk) in self.foreign_keys.iter().enumerate() {
            in_range(format!("foreign_keys[{i}][0]"), fk.from)?;
            in_range(format!("foreign_keys[{i}][1]"), fk.to)?;
            if fk.from == fk.to {
                return Err(SchemaError::SelfReferentialForeignKey {
                    db_id: self.db_id.clone(),
                    index: i,
                });
            }
        }
        let mut seen = HashSet::new();
        for (i, pk) in self.primary_keys.iter().enumerate() {
            in_range(format!("primary_keys[{i}]"), *pk)?;
            if !seen.insert(*pk) {
                return Err(SchemaError::DuplicatePrimaryKey {
                    db_id: self.db_id.clone(),
                    table: pk.table,
                    column: pk.column,
                });
            }
        }
        for table in &self.tables {
            let mut names = HashSet::new();
            for column in &table.columns {
                if !names.insert(&column.name.norm_tokens) {
                    return Err(SchemaError::DuplicateColumn {
                        db_id: self.db_id.clone(),
                        table: table.name.original.clone(),
                        column: column.name.key(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn db_id(&self) -> &str {
        &self.db_id
    }

    pub fn tables(&self) -> &[TableDef] {
        &self.tables
    }

    pub fn table(&self, index: usize) -> Option<&TableDef> {
        self.tables.get(index)
    }

    pub fn column(&self, r: ColumnRef) -> Option<&ColumnDef> {
        self.tables.get(r.table)?.columns.get(r.column)
    }

    pub fn foreign_keys(&self) -> &[ForeignKey] {
        &self.foreign_keys
    }

    pub fn primary_keys(&self) -> &[ColumnRef] {
        &self.primary_keys
    }

    /// Table ordinal by case-insensitive original name.
    pub fn table_index(&self, name: &str) -> Option<usize> {
        self.tables
            .iter()
            .position(|t| t.name.original.eq_ignore_ascii_case(name))
    }

    /// Resolves a corpus-wide column number. `None` for "*" or out of range.
    pub fn source_column(&self, index: usize) -> Option<ColumnRef> {
        self.source_columns.get(index).copied().flatten()
    }

    pub fn column_count(&self) -> usize {
        self.tables.iter().map(|t| t.columns.len()).sum()
    }
}

// ---------------------------------------------------------------------------
// ER models

/// Identifier of an entity, attribute or relationship. Unique across a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(pub u32);

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErEntity {
    pub id: ElementId,
    pub name: NameForm,
    #[serde(default)]
    pub inferred: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErAttribute {
    pub id: ElementId,
    pub name: NameForm,
    pub owner: ElementId,
    #[serde(default)]
    pub inferred: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelKind {
    EntityEntity,
    EntityAttribute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provenance {
    ForeignKey,
    RelationTable,
    Containment,
}

impl Provenance {
    pub fn kind(self) -> RelKind {
        match self {
            Provenance::Containment => RelKind::EntityAttribute,
            Provenance::ForeignKey | Provenance::RelationTable => RelKind::EntityEntity,
        }
    }
}

/// An edge of the model. Entity-attribute edges are ordered (entity, attribute).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErRelationship {
    pub id: ElementId,
    pub kind: RelKind,
    pub endpoints: (ElementId, ElementId),
    pub name: NameForm,
    pub provenance: Provenance,
    #[serde(default)]
    pub inferred: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {message}")]
pub struct ModelError {
    pub path: String,
    pub message: String,
}

impl ModelError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Entities, attributes and relationships, each keyed by id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "ErModelDoc", into = "ErModelDoc")]
pub struct ErModel {
    entities: BTreeMap<ElementId, ErEntity>,
    attributes: BTreeMap<ElementId, ErAttribute>,
    relationships: BTreeMap<ElementId, ErRelationship>,
}

#[derive(Serialize, Deserialize)]
struct ErModelDoc {
    entities: Vec<ErEntity>,
    attributes: Vec<ErAttribute>,
    relationships: Vec<ErRelationship>,
}

impl TryFrom<ErModelDoc> for ErModel {
    type Error = ModelError;

    fn try_from(doc: ErModelDoc) -> Result<Self, Self::Error> {
        ErModel::new(doc.entities, doc.attributes, doc.relationships)
    }
}

impl From<ErModel> for ErModelDoc {
    fn from(model: ErModel) -> Self {
        Self {
            entities: model.entities.into_values().collect(),
            attributes: model.attributes.into_values().collect(),
            relationships: model.relationships.into_values().collect(),
        }
    }
}

impl ErModel {
    pub fn new(
        entities: Vec<ErEntity>,
        attributes: Vec<ErAttribute>,
        relationships: Vec<ErRelationship>,
    ) -> Result<Self, ModelError> {
        let mut ids = HashSet::new();
        let mut check_id = |path: String, id: ElementId| {
            if ids.insert(id) {
                Ok(())
            } else {
                Err(ModelError::new(path, format!("duplicate id {}", id.0)))
            }
        };
        for (i, e) in entities.iter().enumerate() {
            check_id(format!("entities[{i}].id"), e.id)?;
        }
        for (i, a) in attributes.iter().enumerate() {
            check_id(format!("attributes[{i}].id"), a.id)?;
        }
        for (i, r) in relationships.iter().enumerate() {
            check_id(format!("relationships[{i}].id"), r.id)?;
        }

        let model = Self {
            entities: entities.into_iter().map(|e| (e.id, e)).collect(),
            attributes: attributes.into_iter().map(|a| (a.id, a)).collect(),
            relationships: relationships.into_iter().map(|r| (r.id, r)).collect(),
        };
        model.validate_links()?;
        Ok(model)
    }

    fn validate_links(&self) -> Result<(), ModelError> {
        for (i, a) in self.attributes.values().enumerate() {
            if !self.entities.contains_key(&a.owner) {
                return Err(ModelError::new(
                    format!("attributes[{i}].owner"),
                    format!(
                        "attribute {} is owned by missing entity {}",
                        a.id.0, a.owner.0
                    ),
                ));
            }
        }
        for (i, r) in self.relationships.values().enumerate() {
            let path = format!("relationships[{i}]");
            if r.provenance.kind() != r.kind {
                return Err(ModelError::new(
                    format!("{path}.provenance"),
                    format!(
                        "{:?} provenance on a {:?} relationship",
                        r.provenance, r.kind
                    ),
                ));
            }
            let (a, b) = r.endpoints;
            match r.kind {
                RelKind::EntityEntity => {
                    for (slot, id) in [(0, a), (1, b)] {
                        if !self.entities.contains_key(&id) {
                            return Err(ModelError::new(
                                format!("{path}.endpoints[{slot}]"),
                                format!("{} is not an entity of this model", id.0),
                            ));
                        }
                    }
                }
                RelKind::EntityAttribute => {
                    if !self.entities.contains_key(&a) {
                        return Err(ModelError::new(
                            format!("{path}.endpoints[0]"),
                            format!("{} is not an entity of this model", a.0),
                        ));
                    }
                    let Some(attr) = self.attributes.get(&b) else {
                        return Err(ModelError::new(
                            format!("{path}.endpoints[1]"),
                            format!("{} is not an attribute of this model", b.0),
                        ));
                    };
                    if attr.owner != a {
                        return Err(ModelError::new(
                            format!("{path}.endpoints"),
                            format!(
                                "attribute {} is owned by {}, not {}",
                                b.0, attr.owner.0, a.0
                            ),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.attributes.is_empty() && self.relationships.is_empty()
    }

    pub fn entities(&self) -> impl Iterator<Item = &ErEntity> {
        self.entities.values()
    }

    pub fn attributes(&self) -> impl Iterator<Item = &ErAttribute> {
        self.attributes.values()
    }

    pub fn relationships(&self) -> impl Iterator<Item = &ErRelationship> {
        self.relationships.values()
    }

    pub fn entity(&self, id: ElementId) -> Option<&ErEntity> {
        self.entities.get(&id)
    }

    pub fn attribute(&self, id: ElementId) -> Option<&ErAttribute> {
        self.attributes.get(&id)
    }

    pub fn relationship(&self, id: ElementId) -> Option<&ErRelationship> {
        self.relationships.get(&id)
    }

    pub fn contains(&self, id: ElementId) -> bool {
        self.entities.contains_key(&id)
            || self.attributes.contains_key(&id)
            || self.relationships.contains_key(&id)
    }

    /// Display name of any element.
    pub fn name_of(&self, id: ElementId) -> Option<&NameForm> {
        self.entities
            .get(&id)
            .map(|e| &e.name)
            .or_else(|| self.attributes.get(&id).map(|a| &a.name))
            .or_else(|| self.relationships.get(&id).map(|r| &r.name))
    }

    /// The containment edge of an attribute, if present.
    pub fn containment_of(&self, attribute: ElementId) -> Option<&ErRelationship> {
        self.relationships
            .values()
            .find(|r| r.provenance == Provenance::Containment && r.endpoints.1 == attribute)
    }

    pub fn len(&self) -> usize {
        self.entities.len() + self.attributes.len() + self.relationships.len()
    }

    /// Drops an entity together with its attributes and every edge touching
    /// any of them.
    pub fn without_entity(&self, id: ElementId) -> ErModel {
        let gone: BTreeSet<ElementId> = std::iter::once(id)
            .chain(
                self.attributes
                    .values()
                    .filter(|a| a.owner == id)
                    .map(|a| a.id),
            )
            .collect();
        ErModel {
            entities: self
                .entities
                .iter()
                .filter(|(k, _)| !gone.contains(k))
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
            attributes: self
                .attributes
                .iter()
                .filter(|(k, _)| !gone.contains(k))
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
            relationships: self
                .relationships
                .iter()
                .filter(|(_, r)| !gone.contains(&r.endpoints.0) && !gone.contains(&r.endpoints.1))
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        normalize_name(s).norm_tokens
    }

    #[test]
    fn splits_and_lemmatizes() {
        assert_eq!(toks("singer_name"), ["singer", "name"]);
        assert_eq!(toks("Students"), ["student"]);
        assert_eq!(toks("Date of Birth"), ["date", "of", "birth"]);
        assert_eq!(toks("Cities"), ["city"]);
        assert_eq!(toks("classes"), ["class"]);
        assert_eq!(toks("courses"), ["course"]);
        assert_eq!(toks("status"), ["status"]);
        assert_eq!(toks("movies"), ["movie"]);
        assert_eq!(toks("Singer-ID"), ["singer", "id"]);
        assert!(toks("").is_empty());
        assert!(toks(" ?! ").is_empty());
    }

    #[test]
    fn no_lemmatize_only_splits() {
        let n = Normalizer::without_lemmatization();
        assert_eq!(n.tokens("Students_Names"), ["students", "names"]);
    }

    #[test]
    fn exception_targets_are_fixed_points() {
        let n = Normalizer::default();
        for (_, target) in DEFAULT_EXCEPTIONS {
            assert_eq!(n.lemma(target), *target);
        }
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(s in "[A-Za-z_ ?,.'0-9]{0,40}") {
            let first = normalize_name(&s);
            let again = normalize_name(&first.key());
            prop_assert_eq!(&first.norm_tokens, &again.norm_tokens);
            if s.chars().any(|c| c.is_alphanumeric()) {
                prop_assert!(!first.norm_tokens.is_empty());
            }
        }
    }

    fn table(name: &str, cols: &[&str]) -> TableDef {
        TableDef::new(
            name,
            cols.iter().map(|c| ColumnDef::new(c, "text")).collect(),
        )
    }

    #[test]
    fn schema_rejects_bad_refs() {
        let err = DatabaseSchema::new(
            "db",
            vec![table("a", &["x"])],
            vec![ForeignKey {
                from: ColumnRef::new(0, 0),
                to: ColumnRef::new(0, 5),
            }],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, SchemaError::ColumnOutOfRange { .. }));

        let err = DatabaseSchema::new(
            "db",
            vec![table("a", &["x"])],
            vec![ForeignKey {
                from: ColumnRef::new(0, 0),
                to: ColumnRef::new(0, 0),
            }],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, SchemaError::SelfReferentialForeignKey { .. }));

        let err = DatabaseSchema::new(
            "db",
            vec![table("a", &["x"])],
            vec![],
            vec![ColumnRef::new(0, 0), ColumnRef::new(0, 0)],
        )
        .unwrap_err();
        assert!(matches!(err, SchemaError::DuplicatePrimaryKey { .. }));

        let err = DatabaseSchema::new("db", vec![table("a", &["Name", "names"])], vec![], vec![])
            .unwrap_err();
        assert!(matches!(err, SchemaError::DuplicateColumn { .. }));
    }

    #[test]
    fn default_source_numbering_skips_star() {
        let s = DatabaseSchema::new(
            "db",
            vec![table("a", &["x", "y"]), table("b", &["z"])],
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(s.source_column(0), None);
        assert_eq!(s.source_column(1), Some(ColumnRef::new(0, 0)));
        assert_eq!(s.source_column(3), Some(ColumnRef::new(1, 0)));
        assert_eq!(s.source_column(4), None);
    }

    fn entity(id: u32, name: &str) -> ErEntity {
        ErEntity {
            id: ElementId(id),
            name: name.into(),
            inferred: false,
        }
    }

    fn attr(id: u32, name: &str, owner: u32) -> ErAttribute {
        ErAttribute {
            id: ElementId(id),
            name: name.into(),
            owner: ElementId(owner),
            inferred: false,
        }
    }

    fn rel(id: u32, a: u32, b: u32, provenance: Provenance) -> ErRelationship {
        ErRelationship {
            id: ElementId(id),
            kind: provenance.kind(),
            endpoints: (ElementId(a), ElementId(b)),
            name: "r".into(),
            provenance,
            inferred: false,
        }
    }

    #[test]
    fn model_invariants_enforced() {
        let ok = ErModel::new(
            vec![entity(0, "a"), entity(1, "b")],
            vec![attr(2, "x", 0)],
            vec![
                rel(3, 0, 2, Provenance::Containment),
                rel(4, 0, 1, Provenance::ForeignKey),
                rel(5, 1, 1, Provenance::RelationTable),
            ],
        );
        assert!(ok.is_ok());

        let orphan = ErModel::new(vec![entity(0, "a")], vec![attr(1, "x", 9)], vec![]);
        assert_eq!(orphan.unwrap_err().path, "attributes[0].owner");

        let dup = ErModel::new(vec![entity(0, "a")], vec![attr(0, "x", 0)], vec![]);
        assert!(dup.unwrap_err().message.contains("duplicate"));

        let wrong_owner = ErModel::new(
            vec![entity(0, "a"), entity(1, "b")],
            vec![attr(2, "x", 0)],
            vec![rel(3, 1, 2, Provenance::Containment)],
        );
        assert!(wrong_owner.is_err());

        let mut mismatched = rel(3, 0, 1, Provenance::ForeignKey);
        mismatched.kind = RelKind::EntityAttribute;
        let bad_kind = ErModel::new(
            vec![entity(0, "a"), entity(1, "b")],
            vec![],
            vec![mismatched],
        );
        assert!(bad_kind.unwrap_err().path.ends_with("provenance"));

        let dangling = ErModel::new(
            vec![entity(0, "a")],
            vec![],
            vec![rel(3, 0, 7, Provenance::ForeignKey)],
        );
        assert!(dangling.is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = ErModel::new(
            vec![entity(0, "teacher"), entity(1, "student")],
            vec![attr(2, "name", 0)],
            vec![
                rel(3, 0, 2, Provenance::Containment),
                rel(4, 0, 1, Provenance::RelationTable),
            ],
        )
        .unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: ErModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);

        let bad =
            r#"{"entities":[],"attributes":[{"id":1,"name":"x","owner":0}],"relationships":[]}"#;
        let err = serde_json::from_str::<ErModel>(bad).unwrap_err();
        assert!(err.to_string().contains("attributes[0].owner"));
    }

    #[test]
    fn removing_entity_keeps_model_valid() {
        let m = ErModel::new(
            vec![entity(0, "a"), entity(1, "b")],
            vec![attr(2, "x", 0), attr(3, "y", 1)],
            vec![
                rel(4, 0, 2, Provenance::Containment),
                rel(5, 1, 3, Provenance::Containment),
                rel(6, 0, 1, Provenance::ForeignKey),
            ],
        )
        .unwrap();
        let smaller = m.without_entity(ElementId(0));
        assert_eq!(smaller.len(), 3);
        let doc: ErModelDoc = smaller.clone().into();
        let rebuilt = ErModel::try_from(doc).unwrap();
        assert_eq!(rebuilt, smaller);
    }
}
