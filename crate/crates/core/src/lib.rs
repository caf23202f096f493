//! Build NL-to-ER-model datasets from text-to-SQL corpora.
//!
//! Each database schema becomes a raw ER model. Each question is linked to
//! the tables and columns its SQL query touches, and the raw model is pruned
//! to what the questions actually mention.
//!
//! ```
//! use nl2erm::{extract_references, transform_schema, Linker};
//! use nl2erm::model::{ColumnDef, DatabaseSchema, TableDef};
//!
//! let schema = DatabaseSchema::new(
//!     "concert_singer",
//!     vec![TableDef::new(
//!         "singer",
//!         vec![ColumnDef::new("singer_id", "number"), ColumnDef::new("name", "text")],
//!     )],
//!     vec![],
//!     vec![],
//! )
//! .unwrap();
//! let (raw, _) = transform_schema(&schema).unwrap();
//! let refs = extract_references("SELECT name FROM singer", &schema).unwrap();
//! let ann = Linker::default().annotate("Show the name of every singer.", None, &refs, &raw, &schema);
//! assert_eq!(ann.entities.len(), 1);
//! assert_eq!(ann.attributes.len(), 1);
//! assert_eq!(ann.relationships.len(), 1);
//! ```

pub mod assemble;
pub mod eval;
pub mod ingest;
pub mod link;
pub mod model;
pub mod sql;
pub mod transform;

pub use assemble::{process_database, prune, AnnotationRecord, DatabaseOutput, DiagramFormat};
pub use eval::{score, EvalOptions, EvalReport};
pub use link::{AnnotatedUtterance, Label, Linker};
pub use model::{DatabaseSchema, ElementId, ErModel};
pub use sql::extract_references;
pub use transform::{transform_schema, RawEr};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/er-models.md")]
    mod er_models {}
    #[doc = include_str!("../../../book/src/linking.md")]
    mod linking {}
    #[doc = include_str!("../../../book/src/pruning.md")]
    mod pruning {}
    #[doc = include_str!("../../../book/src/outputs.md")]
    mod outputs {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
