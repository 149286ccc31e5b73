//! Annotated task formats: slash-tag POS lines, entity outputs and
//! instruction records.

mod entities;
mod records;
mod slash_tags;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use entities::{
    parse_entity_output, parse_entity_output_with, EntityCategory, EntityKeyAliases,
    EntityParseError, EntitySet,
};
pub use records::{
    decode_lines, parse_records, read_records, write_jsonl, write_records, InstructionRecord,
    MalformedLine, RecordsRead, Stage, Task,
};
pub use slash_tags::{
    parse_slash_tags, serialize_slash_tags, PosTag, SlashTagError, Tag, TaggedItem,
    TaggedSequence,
};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Json(String),
}

impl FormatError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
