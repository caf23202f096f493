//! Reference extraction from SQL queries.
//!
//! Queries are tokenized, parsed into a small expression tree, and walked
//! once with a scope stack so that aliases and bare column names resolve to
//! concrete schema positions. Anything outside the supported subset is a
//! parse error rather than a silently partial result.

mod lexer;
mod oracle;
mod parser;
mod refs;

use thiserror::Error;

pub use oracle::{
    oracle_compare, oracle_sweep, structured_references, OracleDisagreement, OracleReport,
    OracleSweep, StructuredReferences,
};
pub use parser::{parse_query, Query};
pub use refs::{extract_references, references_of, SqlReferenceSet, TablePair};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("unexpected character {ch:?} at {pos}")]
    UnexpectedChar { pos: usize, ch: char },
    #[error("unterminated quote starting at {pos}")]
    UnterminatedString { pos: usize },
    #[error("syntax error at {pos}: expected {expected}, found {found}")]
    Syntax {
        pos: usize,
        expected: String,
        found: String,
    },
    #[error("unknown table {name:?} at {pos}")]
    UnknownTable { pos: usize, name: String },
    #[error("unknown table or alias {name:?} at {pos}")]
    UnknownQualifier { pos: usize, name: String },
    #[error("cannot resolve column {name:?} at {pos}")]
    UnresolvedColumn { pos: usize, name: String },
    #[error("column {name:?} at {pos} is ambiguous between {candidates:?}")]
    AmbiguousColumn {
        pos: usize,
        name: String,
        candidates: Vec<String>,
    },
}

impl SqlError {
    /// Byte offset of the offending token.
    pub fn pos(&self) -> usize {
        match self {
            SqlError::UnexpectedChar { pos, .. }
            | SqlError::UnterminatedString { pos }
            | SqlError::Syntax { pos, .. }
            | SqlError::UnknownTable { pos, .. }
            | SqlError::UnknownQualifier { pos, .. }
            | SqlError::UnresolvedColumn { pos, .. }
            | SqlError::AmbiguousColumn { pos, .. } => *pos,
        }
    }
}
