//! Core engine for summarizing evolving events described by multiple sources.
//!
//! The pipeline mirrors a four-stage architecture: typed *messages* are
//! extracted from timestamped report streams, connected with synchronic and
//! diachronic cross-document relations evaluated from declarative constraint
//! specifications, materialized into a *grid* (a message/relation DAG), then
//! transformed into an ordered document plan and realized through fixed
//! templates.
//!
//! Modules:
//! - [`spec_dsl`]: the `.topic` specification format: ontology, message
//!   schemas, relation schemas, topic configuration.
//! - [`message`]: message instances, bitemporal stamps, reference-time
//!   normalization, report-stream ingestion.
//! - [`extract`]: deterministic gazetteer/trigger-lexicon extraction of
//!   messages from tokenized documents.
//! - [`relations`]: candidate gating and constraint evaluation producing
//!   relation instances.
//! - [`evolution`]: linearity and synchronicity classification of activity
//!   timelines and report streams, plus a seeded stream generator.
//! - [`grid`]: grid construction, incremental extension, sub-grid queries,
//!   canonical serialization.
//! - [`planner`]: document planning over the grid and template realization.
//! - [`eval`]: precision/recall/F-measure scoring against gold annotations.

pub mod diag;
pub mod eval;
pub mod evolution;
pub mod extract;
pub mod grid;
pub mod message;
pub mod planner;
pub mod relations;
pub mod spec_dsl;
pub mod timestamp;

pub use diag::{Diagnostic, Severity};
pub use timestamp::Timestamp;
