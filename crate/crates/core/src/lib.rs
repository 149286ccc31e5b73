//! Benchmark harness and instruction-data factory for Classical Chinese NLP.
//!
//! The crate is layered bottom-up:
//!
//! - [`textnorm`]: canonicalization and the punctuation inventory.
//! - [`formats`]: slash-tag POS lines, entity outputs, instruction records.
//! - [`metrics`]: P/R/F1 for the understanding tasks, character BLEU,
//!   embedding-based similarity, and aggregation.
//! - [`corpus`]: ingestion, cleaning, deduplication and size accounting.
//! - [`client`]: chat and embedding endpoints, retries, deterministic mocks.
//! - [`prompt`]: prompt templates for answering and instruction construction.
//! - [`bench`]: the benchmark runner, answer extraction, scoring and reports.
//! - [`datagen`]: the instruction-construction pipeline.

pub mod textnorm;
pub mod formats;
pub mod metrics;
pub mod corpus;
pub mod client;
pub mod prompt;
pub mod bench;
pub mod datagen;
