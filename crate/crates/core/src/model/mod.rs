//! Typed models and metamodels, conformance checking, and element paths.

mod conformance;
mod element;
mod metamodel;
mod path;

use thiserror::Error;

pub use conformance::{check_conformance, Violation};
pub use element::{parse_model, path_of, peek_metamodel_name, resolve_path, Element, Model, Value};
pub use metamodel::{
    parse_metamodel, AttributeDef, ClassDef, CollectionDef, Feature, Metamodel, MetamodelRegistry, PrimitiveType,
    ReferenceDef,
};
pub use path::{parse_path, print_path, ElementPath, PathSyntaxError, Segment, ROOT_SEGMENT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },
    #[error("conformance error at `{path}`: {message}")]
    Conformance { path: String, message: String },
    #[error("path not found: `{path}`")]
    PathNotFound { path: String },
    #[error("element is not part of the model")]
    NotInModel,
    #[error(transparent)]
    PathSyntax(#[from] PathSyntaxError),
}

impl ModelError {
    pub(crate) fn syntax(err: serde_json::Error) -> Self {
        ModelError::Syntax {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
