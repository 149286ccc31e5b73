//! The four-category entity output and its lenient parser.
//!
//! Model answers arrive either in the quoted-list schema
//! `'characters': [...], 'place': [...], 'time': [...], 'official positions': [...]`,
//! as a JSON object with the same keys, or wrapped in prose. The parser looks
//! for `key: [list]` shapes and ignores everything around them.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityCategory {
    Characters,
    Place,
    Time,
    OfficialPositions,
}

impl EntityCategory {
    pub const ALL: [EntityCategory; 4] = [
        EntityCategory::Characters,
        EntityCategory::Place,
        EntityCategory::Time,
        EntityCategory::OfficialPositions,
    ];

    /// Key used in the output schema.
    pub fn key(self) -> &'static str {
        match self {
            EntityCategory::Characters => "characters",
            EntityCategory::Place => "place",
            EntityCategory::Time => "time",
            EntityCategory::OfficialPositions => "official positions",
        }
    }
}

impl fmt::Display for EntityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySet {
    #[serde(default)]
    pub characters: Vec<String>,
    #[serde(default)]
    pub place: Vec<String>,
    #[serde(default)]
    pub time: Vec<String>,
    #[serde(default, rename = "official positions", alias = "official_positions")]
    pub official_positions: Vec<String>,
}

impl EntitySet {
    pub fn new(
        characters: &[&str],
        place: &[&str],
        time: &[&str],
        official_positions: &[&str],
    ) -> Self {
        let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Self {
            characters: own(characters),
            place: own(place),
            time: own(time),
            official_positions: own(official_positions),
        }
    }

    pub fn get(&self, cat: EntityCategory) -> &[String] {
        match cat {
            EntityCategory::Characters => &self.characters,
            EntityCategory::Place => &self.place,
            EntityCategory::Time => &self.time,
            EntityCategory::OfficialPositions => &self.official_positions,
        }
    }

    pub fn get_mut(&mut self, cat: EntityCategory) -> &mut Vec<String> {
        match cat {
            EntityCategory::Characters => &mut self.characters,
            EntityCategory::Place => &mut self.place,
            EntityCategory::Time => &mut self.time,
            EntityCategory::OfficialPositions => &mut self.official_positions,
        }
    }

    pub fn is_empty(&self) -> bool {
        EntityCategory::ALL.iter().all(|c| self.get(*c).is_empty())
    }

    pub fn total(&self) -> usize {
        EntityCategory::ALL.iter().map(|c| self.get(*c).len()).sum()
    }

    /// Renders the quoted-list schema used in prompts and training outputs.
    pub fn to_schema_string(&self) -> String {
        EntityCategory::ALL
            .iter()
            .map(|cat| {
                let items: Vec<String> = self.get(*cat).iter().map(|e| format!("'{e}'")).collect();
                format!("'{}': [{}]", cat.key(), items.join(", "))
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EntityParseError {
    #[error("no entity category key found in the response")]
    NoStructureFound,
}

/// Maps spelled-out keys onto categories. Keys are compared after
/// lower-casing and removing whitespace, underscores, hyphens and quotes.
#[derive(Debug, Clone)]
pub struct EntityKeyAliases {
    aliases: Vec<(String, EntityCategory)>,
}

impl Default for EntityKeyAliases {
    fn default() -> Self {
        use EntityCategory::*;
        let mut this = Self {
            aliases: Vec::new(),
        };
        for (alias, cat) in [
            ("characters", Characters),
            ("character", Characters),
            ("人物", Characters),
            ("人名", Characters),
            ("place", Place),
            ("places", Place),
            ("地点", Place),
            ("地名", Place),
            ("time", Time),
            ("times", Time),
            ("时间", Time),
            ("officialpositions", OfficialPositions),
            ("officialposition", OfficialPositions),
            ("officialtitles", OfficialPositions),
            ("官职", OfficialPositions),
            ("职官", OfficialPositions),
        ] {
            this.add(alias, cat);
        }
        this
    }
}

impl EntityKeyAliases {
    pub fn empty() -> Self {
        Self {
            aliases: Vec::new(),
        }
    }

    pub fn add(&mut self, alias: &str, cat: EntityCategory) {
        let key = normalize_key(alias);
        if !key.is_empty() && !self.aliases.iter().any(|(a, _)| *a == key) {
            self.aliases.push((key, cat));
            self.aliases
                .sort_by_key(|a| std::cmp::Reverse(a.0.chars().count()));
        }
    }

    /// Parses an alias file: `alias<TAB>category` per line, where category
    /// is one of the four schema keys.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut this = Self::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (alias, cat) = line
                .split_once('\t')
                .ok_or_else(|| format!("line {}: expected alias<TAB>category", n + 1))?;
            let cat = this
                .lookup_exact(cat)
                .ok_or_else(|| format!("line {}: unknown category {cat:?}", n + 1))?;
            this.add(alias, cat);
        }
        Ok(this)
    }

    pub fn lookup_exact(&self, key: &str) -> Option<EntityCategory> {
        let key = normalize_key(key);
        self.aliases
            .iter()
            .find(|(a, _)| *a == key)
            .map(|(_, c)| *c)
    }

    /// Longest alias that `key` ends with, for keys glued to preceding prose.
    fn lookup_suffix(&self, key: &str) -> Option<EntityCategory> {
        let key = normalize_key(key);
        self.aliases
            .iter()
            .find(|(a, _)| key.ends_with(a.as_str()))
            .map(|(_, c)| *c)
    }

    /// True when `text` mentions the category anywhere.
    pub fn mentions(&self, text: &str, cat: EntityCategory) -> bool {
        let squashed = normalize_key(text);
        self.aliases
            .iter()
            .filter(|(_, c)| *c == cat)
            .any(|(a, _)| squashed.contains(a.as_str()))
    }
}

fn normalize_key(s: &str) -> String {
    s.chars()
        .filter(|c| !c.is_whitespace() && !matches!(c, '_' | '-') && !is_quote(*c))
        .flat_map(char::to_lowercase)
        .collect()
}

fn is_quote(c: char) -> bool {
    matches!(c, '\'' | '"' | '“' | '”' | '‘' | '’')
}

fn closing_quote(c: char) -> char {
    match c {
        '“' => '”',
        '‘' => '’',
        other => other,
    }
}

fn is_placeholder(item: &str) -> bool {
    item.chars().all(|c| matches!(c, '.' | '…' | '。'))
}

/// Parses with the default key aliases.
pub fn parse_entity_output(text: &str) -> Result<EntitySet, EntityParseError> {
    parse_entity_output_with(text, &EntityKeyAliases::default())
}

pub fn parse_entity_output_with(
    text: &str,
    aliases: &EntityKeyAliases,
) -> Result<EntitySet, EntityParseError> {
    if let Some(set) = parse_json_object(text, aliases) {
        return Ok(set);
    }
    let chars: Vec<char> = text.chars().collect();
    let mut out = EntitySet::default();
    let mut found = false;
    let mut i = 0;
    while i < chars.len() {
        if chars[i] != '[' {
            i += 1;
            continue;
        }
        let Some(cat) = key_before(&chars, i, aliases) else {
            i += 1;
            continue;
        };
        let (items, end) = list_at(&chars, i);
        // a later occurrence replaces an earlier one (e.g. an echoed template)
        *out.get_mut(cat) = items;
        found = true;
        i = end + 1;
    }
    if found {
        Ok(out)
    } else {
        Err(EntityParseError::NoStructureFound)
    }
}

fn parse_json_object(text: &str, aliases: &EntityKeyAliases) -> Option<EntitySet> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    if end <= start {
        return None;
    }
    let map: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&text[start..=end]).ok()?;
    let mut out = EntitySet::default();
    let mut found = false;
    for (key, value) in map {
        let Some(cat) = aliases.lookup_exact(&key) else {
            continue;
        };
        found = true;
        let items = match value {
            serde_json::Value::Array(values) => values
                .into_iter()
                .filter_map(|v| match v {
                    serde_json::Value::String(s) => Some(s.trim().to_owned()),
                    serde_json::Value::Null => None,
                    other => Some(other.to_string()),
                })
                .filter(|s| !s.is_empty() && !is_placeholder(s))
                .collect(),
            serde_json::Value::String(s) if !s.trim().is_empty() => vec![s.trim().to_owned()],
            _ => Vec::new(),
        };
        *out.get_mut(cat) = items;
    }
    found.then_some(out)
}

/// Reads backwards from the `[` at `open` over `key :` and resolves the key.
fn key_before(chars: &[char], open: usize, aliases: &EntityKeyAliases) -> Option<EntityCategory> {
    let mut j = open;
    let skip_ws = |j: &mut usize| {
        while *j > 0 && chars[*j - 1].is_whitespace() {
            *j -= 1;
        }
    };
    skip_ws(&mut j);
    if j == 0 || !matches!(chars[j - 1], ':' | '：') {
        return None;
    }
    j -= 1;
    skip_ws(&mut j);
    if j == 0 {
        return None;
    }
    if is_quote(chars[j - 1]) {
        let end = j - 1;
        let mut k = end;
        while k > 0 && !is_quote(chars[k - 1]) {
            k -= 1;
        }
        let key: String = chars[k..end].iter().collect();
        return aliases.lookup_exact(&key);
    }
    let end = j;
    let mut k = end;
    while k > 0 && !is_key_delimiter(chars[k - 1]) {
        k -= 1;
    }
    let key: String = chars[k..end].iter().collect();
    aliases.lookup_suffix(key.trim())
}

fn is_key_delimiter(c: char) -> bool {
    matches!(
        c,
        ',' | '，' | '{' | '}' | '\n' | ';' | '；' | '。' | ':' | '：' | '、' | '(' | '（' | ']' | '['
    ) || is_quote(c)
}

/// Parses the list opening at `open`; returns the items and the index of the
/// closing bracket (or the last char when unterminated).
fn list_at(chars: &[char], open: usize) -> (Vec<String>, usize) {
    let mut items = Vec::new();
    let mut bare = String::new();
    let mut saw_quotes = false;
    let mut i = open + 1;
    while i < chars.len() {
        let c = chars[i];
        if c == ']' {
            break;
        }
        if is_quote(c) {
            saw_quotes = true;
            let close = closing_quote(c);
            let mut item = String::new();
            i += 1;
            while i < chars.len() && chars[i] != close {
                item.push(chars[i]);
                i += 1;
            }
            items.push(item.trim().to_owned());
        } else {
            bare.push(c);
        }
        i += 1;
    }
    if !saw_quotes {
        items = bare
            .split([',', '，', '、'])
            .map(|s| s.trim().to_owned())
            .collect();
    }
    items.retain(|s| !s.is_empty() && !is_placeholder(s));
    (items, i.min(chars.len().saturating_sub(1)))
}
