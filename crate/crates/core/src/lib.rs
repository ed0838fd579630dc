//! Motif candidate detection and usage classification.
//!
//! The crate follows the pipeline stages: [`matcher`] finds candidates in
//! raw text, [`corpus`] moves candidates and NLP layers through stand-off
//! files, [`features`] turns each candidate into a fixed-schema vector,
//! [`classifier`] assigns one of four usage labels, and [`metrics`]
//! scores predictions and annotator agreement. [`pipeline`] wires the
//! stages together over a corpus directory.

pub mod corpus;
pub mod error;
pub mod classifier;
pub mod features;
pub mod matcher;
pub mod metrics;
pub mod pipeline;

pub use corpus::{
    AnnotationRecord, Candidate, Culture, Document, LayerBundle, MotifEntry, MotifType, Span,
    UsageLabel,
};
pub use error::{Error, Result};
pub use matcher::{compile_rules, match_document, tokenize, RuleSet};
