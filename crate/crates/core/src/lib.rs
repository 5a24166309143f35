//! Cross-modal retrieval between artwork images and their textual descriptions.
//!
//! The crate covers corpus ingestion and splitting, tf-idf text encoding,
//! visual feature files with RMAC pooling, the joint embedding models (CCA,
//! CML, AMD), retrieval evaluation and a synthetic corpus generator.

pub mod corpus;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod models;
pub mod numeric;
pub mod synthetic;
pub mod text;
pub mod visual;

pub use error::{Error, Result};
pub use exec::Exec;
