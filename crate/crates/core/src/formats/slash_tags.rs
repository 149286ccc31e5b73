//! `segment/tag` POS lines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The closed 17-tag POS inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosTag {
    /// Proper noun, person.
    Nr,
    V,
    N,
    /// Pronoun.
    R,
    /// Punctuation.
    W,
    /// Conjunction.
    C,
    /// Preposition.
    P,
    /// Adverb.
    D,
    /// Time word.
    T,
    /// Modal particle.
    Y,
    /// Auxiliary word.
    U,
    /// Numeral.
    M,
    A,
    /// Locality word.
    F,
    /// Proper noun, place.
    Ns,
    /// Abbreviation.
    J,
    /// Quantifier.
    Q,
}

impl PosTag {
    pub const ALL: [PosTag; 17] = [
        PosTag::Nr,
        PosTag::V,
        PosTag::N,
        PosTag::R,
        PosTag::W,
        PosTag::C,
        PosTag::P,
        PosTag::D,
        PosTag::T,
        PosTag::Y,
        PosTag::U,
        PosTag::M,
        PosTag::A,
        PosTag::F,
        PosTag::Ns,
        PosTag::J,
        PosTag::Q,
    ];

    pub fn code(self) -> &'static str {
        match self {
            PosTag::Nr => "nr",
            PosTag::V => "v",
            PosTag::N => "n",
            PosTag::R => "r",
            PosTag::W => "w",
            PosTag::C => "c",
            PosTag::P => "p",
            PosTag::D => "d",
            PosTag::T => "t",
            PosTag::Y => "y",
            PosTag::U => "u",
            PosTag::M => "m",
            PosTag::A => "a",
            PosTag::F => "f",
            PosTag::Ns => "ns",
            PosTag::J => "j",
            PosTag::Q => "q",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            PosTag::Nr => "proper noun (person)",
            PosTag::V => "verb",
            PosTag::N => "noun",
            PosTag::R => "pronoun",
            PosTag::W => "punctuation",
            PosTag::C => "conjunction",
            PosTag::P => "preposition",
            PosTag::D => "adverb",
            PosTag::T => "time word",
            PosTag::Y => "modal particle",
            PosTag::U => "auxiliary word",
            PosTag::M => "numeral",
            PosTag::A => "adjective",
            PosTag::F => "locality word",
            PosTag::Ns => "proper noun (place)",
            PosTag::J => "abbreviation",
            PosTag::Q => "quantifier",
        }
    }
}

impl FromStr for PosTag {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        PosTag::ALL.into_iter().find(|t| t.code() == s).ok_or(())
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// A tag as read from text: either one of the 17 codes or, in lenient mode,
/// whatever the model wrote.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Known(PosTag),
    Unknown(String),
}

impl Tag {
    pub fn as_str(&self) -> &str {
        match self {
            Tag::Known(t) => t.code(),
            Tag::Unknown(s) => s,
        }
    }

    pub fn known(&self) -> Option<PosTag> {
        match self {
            Tag::Known(t) => Some(*t),
            Tag::Unknown(_) => None,
        }
    }
}

impl From<PosTag> for Tag {
    fn from(t: PosTag) -> Self {
        Tag::Known(t)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaggedItem {
    pub segment: String,
    pub tag: Tag,
}

impl TaggedItem {
    pub fn new(segment: impl Into<String>, tag: impl Into<Tag>) -> Self {
        Self {
            segment: segment.into(),
            tag: tag.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TaggedSequence {
    pub items: Vec<TaggedItem>,
}

impl TaggedSequence {
    pub fn new(items: Vec<TaggedItem>) -> Self {
        Self { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The sentence the segments spell out.
    pub fn text(&self) -> String {
        self.items.iter().map(|i| i.segment.as_str()).collect()
    }

    pub fn has_unknown_tags(&self) -> bool {
        self.items.iter().any(|i| i.tag.known().is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SlashTagError {
    #[error("token {0:?} has no slash")]
    MissingSlash(String),
    #[error("token {0:?} has an empty segment")]
    EmptySegment(String),
    #[error("token {token:?} carries unknown tag {tag:?}")]
    UnknownTag { token: String, tag: String },
    #[error("segment {0:?} is empty or contains a slash or whitespace")]
    InvalidSegment(String),
    #[error("tag {0:?} is empty or contains a slash or whitespace")]
    InvalidTag(String),
}

/// Splits on whitespace and each token at its last slash. In lenient mode
/// unknown tags are kept as [`Tag::Unknown`].
pub fn parse_slash_tags(line: &str, strict: bool) -> Result<TaggedSequence, SlashTagError> {
    let mut items = Vec::new();
    for token in line.split_whitespace() {
        let (segment, tag) = token
            .rsplit_once('/')
            .ok_or_else(|| SlashTagError::MissingSlash(token.to_owned()))?;
        if segment.is_empty() {
            return Err(SlashTagError::EmptySegment(token.to_owned()));
        }
        let tag = match tag.parse::<PosTag>() {
            Ok(t) => Tag::Known(t),
            Err(()) if strict => {
                return Err(SlashTagError::UnknownTag {
                    token: token.to_owned(),
                    tag: tag.to_owned(),
                })
            }
            Err(()) => Tag::Unknown(tag.to_owned()),
        };
        items.push(TaggedItem {
            segment: segment.to_owned(),
            tag,
        });
    }
    Ok(TaggedSequence { items })
}

pub fn serialize_slash_tags(seq: &TaggedSequence) -> Result<String, SlashTagError> {
    let mut out = String::new();
    for (i, item) in seq.items.iter().enumerate() {
        if item.segment.is_empty()
            || item.segment.contains('/')
            || item.segment.chars().any(char::is_whitespace)
        {
            return Err(SlashTagError::InvalidSegment(item.segment.clone()));
        }
        let tag = item.tag.as_str();
        if tag.contains('/') || tag.chars().any(char::is_whitespace) {
            return Err(SlashTagError::InvalidTag(tag.to_owned()));
        }
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&item.segment);
        out.push('/');
        out.push_str(tag);
    }
    Ok(out)
}
