//! Standoff entity annotations for text ranking corpora.

mod codec;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod expansion;
pub mod format;
pub mod fusion;
pub mod geo;
pub mod kb;
pub mod linker;
pub mod retrieval;
pub mod store;

pub use error::{Error, Result};
pub use format::{AnnotatedDocument, DocKey, EntityAnnotation, Field, FormatViolation, Kind, Rule, Severity};
pub use store::{CollectionStats, EntitySelector, IngestPolicy, IngestReport, LinkStore};
