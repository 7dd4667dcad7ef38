//! Descriptor and repository index documents.
//!
//! Both are small XML vocabularies. Parsing is strict: unknown elements or
//! attributes, stray text and out-of-domain values are all rejected.
//! Serialization produces a single canonical byte form (fixed attribute
//! order, two-space indent, LF endings) so equal values always encode to
//! identical bytes.

mod descriptor;
mod index;
mod xml;

pub use descriptor::{parse_descriptor, serialize_descriptor};
pub use index::{parse_repository_index, serialize_repository_index, IndexEntry};

use crate::model::{ModelError, UnitId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("unknown dependency type `{0}`")]
    UnknownDependencyType(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("duplicate unit {0} in repository index")]
    DuplicateUnit(UnitId),
}

impl From<ModelError> for CodecError {
    fn from(e: ModelError) -> Self {
        CodecError::SchemaViolation(e.to_string())
    }
}
