use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::parser::{parse_query, BinaryOp, Expr, Query, Select, TableFactor};
use super::SqlError;
use crate::model::{ColumnRef, DatabaseSchema};

/// Unordered pair of distinct table ordinals, stored low-first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TablePair(usize, usize);

impl TablePair {
    /// `None` when both sides are the same table.
    pub fn new(a: usize, b: usize) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(Self(a, b)),
            std::cmp::Ordering::Greater => Some(Self(b, a)),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn tables(self) -> (usize, usize) {
        (self.0, self.1)
    }

    pub fn connects(self, a: usize, b: usize) -> bool {
        Self::new(a, b) == Some(self)
    }
}

/// Tables, columns and join pairs a query mentions anywhere.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SqlReferenceSet {
    pub tables: BTreeSet<usize>,
    pub columns: BTreeSet<ColumnRef>,
    pub joins: BTreeSet<TablePair>,
}

impl SqlReferenceSet {
    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn has_join(&self, a: usize, b: usize) -> bool {
        TablePair::new(a, b).is_some_and(|p| self.joins.contains(&p))
    }
}

/// Parses `sql_text` and resolves every table and column it references
/// against `schema`.
pub fn extract_references(
    sql_text: &str,
    schema: &DatabaseSchema,
) -> Result<SqlReferenceSet, SqlError> {
    let query = parse_query(sql_text)?;
    references_of(&query, schema)
}

/// Reference extraction over an already-parsed query.
pub fn references_of(query: &Query, schema: &DatabaseSchema) -> Result<SqlReferenceSet, SqlError> {
    let mut collector = Collector {
        schema,
        scopes: Vec::new(),
        out: SqlReferenceSet::default(),
    };
    collector.query(query)?;
    Ok(collector.out)
}

enum Relation {
    Table {
        binding: String,
        table: usize,
    },
    Derived {
        binding: Option<String>,
        outputs: Vec<String>,
    },
}

impl Relation {
    fn binding(&self) -> Option<&str> {
        match self {
            Relation::Table { binding, .. } => Some(binding),
            Relation::Derived { binding, .. } => binding.as_deref(),
        }
    }
}

#[derive(Default)]
struct Scope {
    relations: Vec<Relation>,
    select_aliases: Vec<String>,
}

/// What a column name resolved to.
#[derive(Clone, Copy, PartialEq)]
enum Resolved {
    Column(ColumnRef),
    /// Output of a derived table or a select alias; the underlying columns
    /// were already collected where they were defined.
    Opaque,
}

struct Collector<'s> {
    schema: &'s DatabaseSchema,
    scopes: Vec<Scope>,
    out: SqlReferenceSet,
}

impl Collector<'_> {
    /// Returns the output column names (lowercased) of the query.
    fn query(&mut self, query: &Query) -> Result<Vec<String>, SqlError> {
        match query {
            Query::Select(select) => self.select(select),
            Query::Compound { left, right, .. } => {
                let outputs = self.query(left)?;
                self.query(right)?;
                Ok(outputs)
            }
        }
    }

    fn select(&mut self, select: &Select) -> Result<Vec<String>, SqlError> {
        let mut scope = Scope::default();
        for factor in &select.from {
            match factor {
                TableFactor::Table { name, alias, pos } => {
                    let table =
                        self.schema
                            .table_index(name)
                            .ok_or_else(|| SqlError::UnknownTable {
                                pos: *pos,
                                name: name.clone(),
                            })?;
                    self.out.tables.insert(table);
                    scope.relations.push(Relation::Table {
                        binding: alias.as_deref().unwrap_or(name).to_lowercase(),
                        table,
                    });
                }
                TableFactor::Derived { query, alias } => {
                    let outputs = self.query(query)?;
                    scope.relations.push(Relation::Derived {
                        binding: alias.as_ref().map(|a| a.to_lowercase()),
                        outputs,
                    });
                }
            }
        }
        scope.select_aliases = select
            .items
            .iter()
            .filter_map(|i| i.alias.as_ref().map(|a| a.to_lowercase()))
            .collect();
        self.scopes.push(scope);

        let result = self.select_body(select);
        self.scopes.pop();
        result?;

        Ok(select
            .items
            .iter()
            .map(|item| match (&item.alias, &item.expr) {
                (Some(a), _) => a.to_lowercase(),
                (None, Expr::Column { name, .. }) => name.to_lowercase(),
                _ => String::new(),
            })
            .collect())
    }

    fn select_body(&mut self, select: &Select) -> Result<(), SqlError> {
        for cond in &select.join_conditions {
            self.expr(cond)?;
        }
        for item in &select.items {
            self.expr(&item.expr)?;
        }
        if let Some(e) = &select.selection {
            self.expr(e)?;
        }
        for e in &select.group_by {
            self.expr(e)?;
        }
        if let Some(e) = &select.having {
            self.expr(e)?;
        }
        for item in &select.order_by {
            self.expr(&item.expr)?;
        }
        if let Some(e) = &select.limit {
            self.expr(e)?;
        }
        Ok(())
    }

    fn resolve(
        &self,
        qualifier: Option<&str>,
        name: &str,
        pos: usize,
    ) -> Result<Resolved, SqlError> {
        let lname = name.to_lowercase();
        if let Some(q) = qualifier {
            let lq = q.to_lowercase();
            for scope in self.scopes.iter().rev() {
                let Some(rel) = scope
                    .relations
                    .iter()
                    .find(|r| r.binding() == Some(lq.as_str()))
                else {
                    continue;
                };
                return match rel {
                    Relation::Table { table, .. } => {
                        let column =
                            self.schema.tables()[*table]
                                .column_index(name)
                                .ok_or_else(|| SqlError::UnresolvedColumn {
                                    pos,
                                    name: format!("{q}.{name}"),
                                })?;
                        Ok(Resolved::Column(ColumnRef::new(*table, column)))
                    }
                    Relation::Derived { .. } => Ok(Resolved::Opaque),
                };
            }
            return Err(SqlError::UnknownQualifier {
                pos,
                name: q.to_string(),
            });
        }

        for scope in self.scopes.iter().rev() {
            let mut owners: Vec<Resolved> = Vec::new();
            let mut labels: Vec<String> = Vec::new();
            for rel in &scope.relations {
                match rel {
                    Relation::Table { binding, table } => {
                        if let Some(c) = self.schema.tables()[*table].column_index(name) {
                            owners.push(Resolved::Column(ColumnRef::new(*table, c)));
                            labels.push(binding.clone());
                        }
                    }
                    Relation::Derived { binding, outputs } => {
                        if outputs.contains(&lname) {
                            owners.push(Resolved::Opaque);
                            labels.push(binding.clone().unwrap_or_else(|| "<subquery>".into()));
                        }
                    }
                }
            }
            owners.dedup();
            match owners.len() {
                0 => continue,
                1 => return Ok(owners[0]),
                _ => {
                    return Err(SqlError::AmbiguousColumn {
                        pos,
                        name: name.to_string(),
                        candidates: labels,
                    })
                }
            }
        }
        if self
            .scopes
            .last()
            .is_some_and(|s| s.select_aliases.contains(&lname))
        {
            return Ok(Resolved::Opaque);
        }
        Err(SqlError::UnresolvedColumn {
            pos,
            name: name.to_string(),
        })
    }

    /// Visits an expression; returns the column it denotes when it is a
    /// bare column reference.
    fn expr(&mut self, expr: &Expr) -> Result<Option<ColumnRef>, SqlError> {
        match expr {
            Expr::Column {
                qualifier,
                name,
                pos,
            } => match self.resolve(qualifier.as_deref(), name, *pos)? {
                Resolved::Column(c) => {
                    self.out.columns.insert(c);
                    Ok(Some(c))
                }
                Resolved::Opaque => Ok(None),
            },
            Expr::Wildcard { qualifier, pos } => {
                if let Some(q) = qualifier {
                    let lq = q.to_lowercase();
                    let known = self
                        .scopes
                        .iter()
                        .any(|s| s.relations.iter().any(|r| r.binding() == Some(lq.as_str())));
                    if !known {
                        return Err(SqlError::UnknownQualifier {
                            pos: *pos,
                            name: q.clone(),
                        });
                    }
                }
                Ok(None)
            }
            Expr::Number(_) | Expr::Str(_) | Expr::Null => Ok(None),
            Expr::Function { args, .. } => {
                for a in args {
                    self.expr(a)?;
                }
                Ok(None)
            }
            Expr::Unary { expr, .. } => {
                self.expr(expr)?;
                Ok(None)
            }
            Expr::Binary { op, left, right } => {
                let l = self.expr(left)?;
                let r = self.expr(right)?;
                if *op == BinaryOp::Eq {
                    if let (Some(l), Some(r)) = (l, r) {
                        if let Some(pair) = TablePair::new(l.table, r.table) {
                            self.out.joins.insert(pair);
                        }
                    }
                }
                Ok(None)
            }
            Expr::Between {
                expr, low, high, ..
            } => {
                self.expr(expr)?;
                self.expr(low)?;
                self.expr(high)?;
                Ok(None)
            }
            Expr::InList { expr, list, .. } => {
                self.expr(expr)?;
                for e in list {
                    self.expr(e)?;
                }
                Ok(None)
            }
            Expr::InSubquery { expr, query, .. } => {
                self.expr(expr)?;
                self.query(query)?;
                Ok(None)
            }
            Expr::Exists { query, .. } | Expr::Subquery(query) => {
                self.query(query)?;
                Ok(None)
            }
            Expr::Like { expr, pattern, .. } => {
                self.expr(expr)?;
                self.expr(pattern)?;
                Ok(None)
            }
            Expr::IsNull { expr, .. } => {
                self.expr(expr)?;
                Ok(None)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ColumnDef, TableDef};

    fn schema() -> DatabaseSchema {
        let t = |name: &str, cols: &[&str]| {
            TableDef::new(
                name,
                cols.iter().map(|c| ColumnDef::new(c, "text")).collect(),
            )
        };
        DatabaseSchema::new(
            "theatre",
            vec![
                t("actor", &["name", "age", "musical_id"]),
                t("musical", &["id", "name", "nominee"]),
                t("teach", &["teacher_id", "student_id"]),
            ],
            vec![],
            vec![],
        )
        .unwrap()
    }

    fn c(t: usize, col: usize) -> ColumnRef {
        ColumnRef::new(t, col)
    }

    #[test]
    fn single_table() {
        let r = extract_references("SELECT name FROM actor", &schema()).unwrap();
        assert_eq!(r.tables, BTreeSet::from([0]));
        assert_eq!(r.columns, BTreeSet::from([c(0, 0)]));
        assert!(r.joins.is_empty());
    }

    #[test]
    fn aliased_join() {
        let r = extract_references(
            "SELECT T1.name FROM actor AS T1 JOIN musical AS T2 ON T1.musical_id = T2.id",
            &schema(),
        )
        .unwrap();
        assert_eq!(r.tables, BTreeSet::from([0, 1]));
        assert_eq!(r.columns, BTreeSet::from([c(0, 0), c(0, 2), c(1, 0)]));
        assert_eq!(r.joins, BTreeSet::from([TablePair::new(0, 1).unwrap()]));
        assert!(r.has_join(1, 0));
    }

    #[test]
    fn count_star_adds_no_columns() {
        let r = extract_references("SELECT count(*) FROM teach", &schema()).unwrap();
        assert_eq!(r.tables, BTreeSet::from([2]));
        assert!(r.columns.is_empty());
        assert!(r.joins.is_empty());
    }

    #[test]
    fn implicit_join_in_where() {
        let r = extract_references(
            "SELECT actor.name FROM actor, musical WHERE actor.musical_id = musical.id AND musical.nominee = 'x'",
            &schema(),
        )
        .unwrap();
        assert!(r.has_join(0, 1));
        assert!(r.columns.contains(&c(1, 2)));
    }

    #[test]
    fn nested_and_correlated() {
        let r = extract_references(
            "SELECT name FROM musical WHERE id NOT IN (SELECT musical_id FROM actor WHERE age > 20)",
            &schema(),
        )
        .unwrap();
        assert_eq!(r.tables, BTreeSet::from([0, 1]));
        assert!(r.columns.contains(&c(0, 2)));
        assert!(r.columns.contains(&c(0, 1)));

        let r = extract_references(
            "SELECT T1.name FROM musical AS T1 WHERE EXISTS (SELECT 1 FROM actor AS T2 WHERE T2.musical_id = T1.id)",
            &schema(),
        )
        .unwrap();
        assert!(r.has_join(0, 1));
    }

    #[test]
    fn derived_tables_and_select_aliases() {
        let r = extract_references(
            "SELECT avg(cnt) FROM (SELECT count(*) AS cnt FROM actor GROUP BY musical_id)",
            &schema(),
        )
        .unwrap();
        assert_eq!(r.tables, BTreeSet::from([0]));
        assert_eq!(r.columns, BTreeSet::from([c(0, 2)]));

        let r = extract_references(
            "SELECT musical_id, count(*) AS n FROM actor GROUP BY musical_id ORDER BY n DESC",
            &schema(),
        )
        .unwrap();
        assert_eq!(r.columns, BTreeSet::from([c(0, 2)]));
    }

    #[test]
    fn resolution_errors_carry_positions() {
        let s = schema();
        assert!(matches!(
            extract_references("SELECT name FROM nowhere", &s),
            Err(SqlError::UnknownTable { pos: 17, .. })
        ));
        assert!(matches!(
            extract_references("SELECT salary FROM actor", &s),
            Err(SqlError::UnresolvedColumn { pos: 7, .. })
        ));
        assert!(matches!(
            extract_references("SELECT name FROM actor JOIN musical", &s),
            Err(SqlError::AmbiguousColumn { pos: 7, .. })
        ));
        assert!(matches!(
            extract_references("SELECT T9.name FROM actor AS T1", &s),
            Err(SqlError::UnknownQualifier { .. })
        ));
    }

    #[test]
    fn same_table_twice_is_not_ambiguous_nor_a_join() {
        let r = extract_references(
            "SELECT age FROM actor AS a JOIN actor AS b ON a.musical_id = b.musical_id",
            &schema(),
        )
        .unwrap();
        assert!(r.joins.is_empty());
        assert_eq!(r.tables, BTreeSet::from([0]));
    }

    #[test]
    fn set_operations_union_references() {
        let r = extract_references(
            "SELECT name FROM actor UNION SELECT name FROM musical",
            &schema(),
        )
        .unwrap();
        assert_eq!(r.tables, BTreeSet::from([0, 1]));
        assert_eq!(r.columns, BTreeSet::from([c(0, 0), c(1, 1)]));
    }
}
