//! Text canonicalization and the punctuation inventory.
//!
//! Everything downstream (task parsers, metrics, corpus cleaning) expects
//! text that went through [`normalize_text`], and recognizes punctuation only
//! through a [`PunctInventory`].

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

const DEFAULT_INVENTORY: &str = include_str!("../data/punct_inventory.tsv");
const DEFAULT_SCRIPT_TABLE: &str = include_str!("../data/script_table.tsv");

static BUILTIN_INVENTORY: LazyLock<PunctInventory> = LazyLock::new(|| {
    PunctInventory::parse(DEFAULT_INVENTORY).expect("bundled punctuation inventory is valid")
});

static BUILTIN_SCRIPT_TABLE: LazyLock<ScriptTable> = LazyLock::new(|| {
    ScriptTable::parse(DEFAULT_SCRIPT_TABLE).expect("bundled script table is valid")
});

#[derive(Debug, Error)]
pub enum TableError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("codepoint {cp:?} claimed by both `{first}` and `{second}`")]
    Overlap {
        cp: char,
        first: String,
        second: String,
    },
    #[error("inventory defines {0} classes, at most 255 are supported")]
    TooManyClasses(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnicodeForm {
    /// NFC.
    #[default]
    ComposedCanonical,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScriptMapping {
    #[default]
    Preserve,
    ToSimplified,
    ToTraditional,
}

/// Parameters of [`normalize_text`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormPolicy {
    pub unicode_form: UnicodeForm,
    pub width_folding: bool,
    pub script_mapping: ScriptMapping,
    pub strip_controls: bool,
}

impl Default for NormPolicy {
    fn default() -> Self {
        Self {
            unicode_form: UnicodeForm::ComposedCanonical,
            width_folding: true,
            script_mapping: ScriptMapping::Preserve,
            strip_controls: true,
        }
    }
}

impl NormPolicy {
    /// NFC only: no folding, no script mapping, controls kept.
    pub fn minimal() -> Self {
        Self {
            width_folding: false,
            strip_controls: false,
            ..Self::default()
        }
    }
}

/// One-directional character table used for script mapping.
///
/// The file lists `traditional<TAB>simplified`; the inverse direction is
/// derived. No character may appear on both sides, which keeps mapping
/// idempotent.
#[derive(Debug, Clone, Default)]
pub struct ScriptTable {
    forward: HashMap<char, char>,
    inverse: HashMap<char, char>,
    injective: bool,
}

impl ScriptTable {
    pub fn builtin() -> &'static ScriptTable {
        &BUILTIN_SCRIPT_TABLE
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TableError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut forward = HashMap::new();
        let mut inverse = HashMap::new();
        let mut injective = true;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (src, dst) = line.split_once('\t').ok_or_else(|| TableError::Malformed {
                line: line_no,
                reason: "expected `source<TAB>target`".into(),
            })?;
            let src = single_char(src.trim(), line_no)?;
            let dst = single_char(dst.trim(), line_no)?;
            if forward.insert(src, dst).is_some() {
                return Err(TableError::Malformed {
                    line: line_no,
                    reason: format!("duplicate source {src:?}"),
                });
            }
            match inverse.entry(dst) {
                std::collections::hash_map::Entry::Occupied(_) => injective = false,
                std::collections::hash_map::Entry::Vacant(v) => {
                    v.insert(src);
                }
            }
        }
        if let Some(c) = forward.keys().find(|c| inverse.contains_key(c)) {
            return Err(TableError::Malformed {
                line: 0,
                reason: format!("{c:?} appears as both source and target"),
            });
        }
        Ok(Self {
            forward,
            inverse,
            injective,
        })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// True when no two sources share a target, i.e. both directions are
    /// mutually inverse on the mapped subset.
    pub fn is_bijective(&self) -> bool {
        self.injective
    }

    pub fn to_simplified(&self, c: char) -> Option<char> {
        self.forward.get(&c).copied()
    }

    pub fn to_traditional(&self, c: char) -> Option<char> {
        self.inverse.get(&c).copied()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (char, char)> + '_ {
        self.forward.iter().map(|(a, b)| (*a, *b))
    }
}

fn single_char(s: &str, line: usize) -> Result<char, TableError> {
    let s: String = s.nfc().collect();
    let mut it = s.chars();
    match (it.next(), it.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(TableError::Malformed {
            line,
            reason: format!("expected a single character, got {s:?}"),
        }),
    }
}

/// Result of a normalization pass, with tallies of what was touched.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Normalized {
    pub text: String,
    pub controls_removed: usize,
    /// Ideographs left unchanged because the script table has no entry.
    pub unmapped: usize,
}

/// A [`NormPolicy`] bound to a script table.
#[derive(Debug, Clone)]
pub struct Normalizer<'a> {
    policy: NormPolicy,
    table: &'a ScriptTable,
}

impl<'a> Normalizer<'a> {
    pub fn new(policy: NormPolicy) -> Normalizer<'static> {
        Normalizer {
            policy,
            table: ScriptTable::builtin(),
        }
    }

    pub fn with_table(policy: NormPolicy, table: &'a ScriptTable) -> Self {
        Self { policy, table }
    }

    pub fn policy(&self) -> &NormPolicy {
        &self.policy
    }

    pub fn normalize(&self, raw: &str) -> Normalized {
        let mut controls_removed = 0;
        let stage: String = if self.policy.strip_controls {
            let mut out = String::with_capacity(raw.len());
            let mut chars = raw.chars().peekable();
            while let Some(c) = chars.next() {
                if c == '\r' {
                    if chars.peek() == Some(&'\n') {
                        chars.next();
                    }
                    out.push('\n');
                } else if is_strippable_control(c) {
                    controls_removed += 1;
                } else {
                    out.push(c);
                }
            }
            out
        } else {
            raw.to_owned()
        };

        let stage: String = match self.policy.unicode_form {
            UnicodeForm::ComposedCanonical => stage.nfc().collect(),
        };

        let stage = if self.policy.width_folding {
            fold_width(&stage)
        } else {
            stage
        };

        let mut unmapped = 0;
        let text = match self.policy.script_mapping {
            ScriptMapping::Preserve => stage,
            mapping => stage
                .chars()
                .map(|c| {
                    let mapped = match mapping {
                        ScriptMapping::ToSimplified => self.table.to_simplified(c),
                        _ => self.table.to_traditional(c),
                    };
                    match mapped {
                        Some(m) => m,
                        None => {
                            if is_cjk_ideograph(c) {
                                unmapped += 1;
                            }
                            c
                        }
                    }
                })
                .collect(),
        };

        Normalized {
            text,
            controls_removed,
            unmapped,
        }
    }
}

/// Canonicalizes `raw` under `policy` using the bundled script table.
pub fn normalize_text(raw: &str, policy: &NormPolicy) -> String {
    Normalizer::new(policy.clone()).normalize(raw).text
}

fn is_strippable_control(c: char) -> bool {
    (c.is_control() && c != '\n' && c != '\t')
        || matches!(c, '\u{FEFF}' | '\u{200B}' | '\u{200C}' | '\u{200D}' | '\u{2060}')
}

/// Half-width punctuation to its full-width CJK counterpart. ASCII double
/// quotes alternate between opening and closing marks.
fn fold_width(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut open_quote = true;
    for c in text.chars() {
        let folded = match c {
            ',' => '，',
            ';' => '；',
            ':' => '：',
            '?' => '？',
            '!' => '！',
            '(' => '（',
            ')' => '）',
            '\u{FF61}' => '。',
            '\u{FF64}' => '、',
            '\u{FF62}' => '「',
            '\u{FF63}' => '」',
            '\u{FF65}' => '·',
            '"' => {
                let q = if open_quote { '“' } else { '”' };
                open_quote = !open_quote;
                q
            }
            other => other,
        };
        out.push(folded);
    }
    out
}

pub fn is_cjk_ideograph(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2EBEF
        | 0x2F800..=0x2FA1F
        | 0x30000..=0x323AF
        | 0x3007)
}

/// Index of a class within its [`PunctInventory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId(pub u8);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PunctClass {
    pub id: String,
    /// Surface forms; multi-codepoint forms such as `——` are single marks.
    pub members: Vec<String>,
    pub paired: bool,
}

/// The set of punctuation classes recognized by stripping and scoring.
#[derive(Debug, Clone)]
pub struct PunctInventory {
    classes: Vec<PunctClass>,
    by_char: HashMap<char, ClassId>,
    /// Surfaces keyed by first char, longest first.
    surfaces: HashMap<char, Vec<(Vec<char>, ClassId)>>,
}

impl PunctInventory {
    pub fn builtin() -> &'static PunctInventory {
        &BUILTIN_INVENTORY
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TableError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut classes = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [id, members, kind] = fields[..] else {
                return Err(TableError::Malformed {
                    line: line_no,
                    reason: "expected `class_id<TAB>members<TAB>paired|single`".into(),
                });
            };
            let paired = match kind.trim() {
                "paired" => true,
                "single" => false,
                other => {
                    return Err(TableError::Malformed {
                        line: line_no,
                        reason: format!("unknown kind {other:?}"),
                    })
                }
            };
            let members: Vec<String> = members
                .split(' ')
                .filter(|m| !m.is_empty())
                .map(|m| m.nfc().collect())
                .collect();
            if id.trim().is_empty() || members.is_empty() {
                return Err(TableError::Malformed {
                    line: line_no,
                    reason: "class needs an id and at least one member".into(),
                });
            }
            classes.push(PunctClass {
                id: id.trim().to_owned(),
                members,
                paired,
            });
        }
        Self::from_classes(classes)
    }

    pub fn from_classes(classes: Vec<PunctClass>) -> Result<Self, TableError> {
        if classes.len() > u8::MAX as usize {
            return Err(TableError::TooManyClasses(classes.len()));
        }
        let mut by_char: HashMap<char, ClassId> = HashMap::new();
        let mut surfaces: HashMap<char, Vec<(Vec<char>, ClassId)>> = HashMap::new();
        for (idx, class) in classes.iter().enumerate() {
            let cid = ClassId(idx as u8);
            for member in &class.members {
                for c in member.chars() {
                    match by_char.get(&c) {
                        Some(&other) if other != cid => {
                            return Err(TableError::Overlap {
                                cp: c,
                                first: classes[other.0 as usize].id.clone(),
                                second: class.id.clone(),
                            })
                        }
                        _ => {
                            by_char.insert(c, cid);
                        }
                    }
                }
                let chars: Vec<char> = member.chars().collect();
                surfaces.entry(chars[0]).or_default().push((chars, cid));
            }
        }
        for list in surfaces.values_mut() {
            list.sort_by_key(|s| std::cmp::Reverse(s.0.len()));
        }
        Ok(Self {
            classes,
            by_char,
            surfaces,
        })
    }

    pub fn classes(&self) -> &[PunctClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class(&self, id: ClassId) -> &PunctClass {
        &self.classes[id.0 as usize]
    }

    pub fn class_name(&self, id: ClassId) -> &str {
        &self.classes[id.0 as usize].id
    }

    pub fn class_by_name(&self, name: &str) -> Option<ClassId> {
        self.classes
            .iter()
            .position(|c| c.id == name)
            .map(|i| ClassId(i as u8))
    }

    pub fn classify(&self, cp: char) -> Option<ClassId> {
        self.by_char.get(&cp).copied()
    }

    pub fn contains(&self, cp: char) -> bool {
        self.by_char.contains_key(&cp)
    }

    /// Longest surface matching at the start of `rest`.
    fn match_at(&self, rest: &[char]) -> Option<(usize, ClassId)> {
        let candidates = self.surfaces.get(rest.first()?)?;
        candidates
            .iter()
            .find(|(surface, _)| rest.starts_with(surface))
            .map(|(surface, cid)| (surface.len(), *cid))
    }

    pub fn strip(&self, text: &str) -> PunctAnnotation {
        let chars: Vec<char> = text.chars().collect();
        let mut base = String::with_capacity(text.len());
        let mut base_len = 0;
        let mut marks = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            if let Some((len, class)) = self.match_at(&chars[i..]) {
                marks.push(Mark {
                    offset: base_len,
                    class,
                    surface: chars[i..i + len].iter().collect(),
                });
                i += len;
            } else {
                base.push(chars[i]);
                base_len += 1;
                i += 1;
            }
        }
        PunctAnnotation {
            base_text: base,
            marks,
        }
    }
}

/// Looks `cp` up in the bundled inventory.
pub fn classify_punct(cp: char) -> Option<&'static PunctClass> {
    let inv = PunctInventory::builtin();
    inv.classify(cp).map(|id| inv.class(id))
}

/// Splits `text` into base characters and anchored marks using the bundled
/// inventory.
pub fn strip_punctuation(text: &str) -> PunctAnnotation {
    PunctInventory::builtin().strip(text)
}

/// A removed punctuation mark. `offset` counts base characters preceding it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mark {
    pub offset: usize,
    pub class: ClassId,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PunctAnnotation {
    pub base_text: String,
    /// Sorted by offset; equal offsets keep their original order.
    pub marks: Vec<Mark>,
}

impl PunctAnnotation {
    pub fn base_len(&self) -> usize {
        self.base_text.chars().count()
    }

    /// Puts the marks back, reproducing the text that was stripped.
    pub fn reinsert(&self) -> String {
        let extra: usize = self.marks.iter().map(|m| m.surface.len()).sum();
        let mut out = String::with_capacity(self.base_text.len() + extra);
        let mut marks = self.marks.iter().peekable();
        for (idx, c) in self.base_text.chars().enumerate() {
            while let Some(m) = marks.next_if(|m| m.offset <= idx) {
                out.push_str(&m.surface);
            }
            out.push(c);
        }
        for m in marks {
            out.push_str(&m.surface);
        }
        out
    }
}

impl fmt::Display for PunctAnnotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.reinsert())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const WEI_SENTENCE: &str = "四年春，衞州吁弑桓公而立。";

    fn name(id: ClassId) -> &'static str {
        PunctInventory::builtin().class_name(id)
    }

    #[test]
    fn builtin_inventory_has_fourteen_disjoint_classes() {
        let inv = PunctInventory::builtin();
        assert_eq!(inv.len(), 14);
        let mut seen = HashMap::new();
        for (i, class) in inv.classes().iter().enumerate() {
            for m in &class.members {
                for c in m.chars() {
                    if let Some(prev) = seen.insert(c, i) {
                        assert_eq!(prev, i, "{c:?} in two classes");
                    }
                }
            }
        }
    }

    #[test]
    fn preserve_policy_leaves_clean_text_alone() {
        assert_eq!(normalize_text(WEI_SENTENCE, &NormPolicy::default()), WEI_SENTENCE);
    }

    #[test]
    fn folds_half_width_comma() {
        assert_eq!(normalize_text(",", &NormPolicy::default()), "，");
        let off = NormPolicy {
            width_folding: false,
            ..NormPolicy::default()
        };
        assert_eq!(normalize_text(",", &off), ",");
    }

    #[test]
    fn ascii_quotes_alternate() {
        assert_eq!(
            normalize_text("曰\"善\"", &NormPolicy::default()),
            "曰“善”"
        );
    }

    #[test]
    fn maps_wei_to_simplified_and_back() {
        let to_s = NormPolicy {
            script_mapping: ScriptMapping::ToSimplified,
            ..NormPolicy::default()
        };
        assert_eq!(normalize_text("衞", &to_s), "卫");
        let to_t = NormPolicy {
            script_mapping: ScriptMapping::ToTraditional,
            ..NormPolicy::default()
        };
        assert_eq!(normalize_text("卫", &to_t), "衞");
    }

    #[test]
    fn counts_unmapped_ideographs() {
        let to_s = NormPolicy {
            script_mapping: ScriptMapping::ToSimplified,
            ..NormPolicy::default()
        };
        let out = Normalizer::new(to_s).normalize("衞州吁");
        assert_eq!(out.text, "卫州吁");
        assert_eq!(out.unmapped, 2);
    }

    #[test]
    fn strips_controls_and_crlf() {
        let out = Normalizer::new(NormPolicy::default()).normalize("春\u{8}眠\r\n不觉\r晓\u{FEFF}");
        assert_eq!(out.text, "春眠\n不觉\n晓");
        assert_eq!(out.controls_removed, 2);
    }

    #[test]
    fn nfc_composes() {
        assert_eq!(normalize_text("e\u{301}", &NormPolicy::minimal()), "é");
    }

    #[test]
    fn strip_wei_sentence() {
        let ann = strip_punctuation(WEI_SENTENCE);
        assert_eq!(ann.base_text, "四年春衞州吁弑桓公而立");
        assert_eq!(ann.base_len(), 11);
        let marks: Vec<_> = ann
            .marks
            .iter()
            .map(|m| (m.offset, name(m.class), m.surface.as_str()))
            .collect();
        assert_eq!(marks, vec![(3, "comma", "，"), (11, "period", "。")]);
    }

    #[test]
    fn strip_empty_and_fragment() {
        let ann = strip_punctuation("");
        assert!(ann.base_text.is_empty() && ann.marks.is_empty());
        let ann = strip_punctuation("天下福也。");
        assert_eq!(ann.base_text, "天下福也");
        assert_eq!(ann.marks.len(), 1);
        assert_eq!((ann.marks[0].offset, name(ann.marks[0].class)), (4, "period"));
    }

    #[test]
    fn multi_codepoint_marks_match_longest_first() {
        let ann = strip_punctuation("曰——善……");
        let surfaces: Vec<_> = ann.marks.iter().map(|m| m.surface.as_str()).collect();
        assert_eq!(surfaces, vec!["——", "……"]);
        assert_eq!(name(ann.marks[0].class), "dash");
        assert_eq!(ann.base_text, "曰善");
        let single = strip_punctuation("曰—善");
        assert_eq!(single.marks[0].surface, "—");
    }

    #[test]
    fn non_inventory_symbols_stay_in_base() {
        let ann = strip_punctuation("「曰」");
        assert_eq!(ann.base_text, "「曰」");
        assert!(ann.marks.is_empty());
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_punct('，').unwrap().id, "comma");
        assert_eq!(classify_punct('。').unwrap().id, "period");
        assert!(classify_punct('春').is_none());
        assert!(classify_punct('”').unwrap().paired);
    }

    #[test]
    fn inventory_file_rejects_overlap_and_bad_kind() {
        let err = PunctInventory::parse("a\t，\tsingle\nb\t， 。\tsingle\n").unwrap_err();
        assert!(matches!(err, TableError::Overlap { cp: '，', .. }));
        let err = PunctInventory::parse("a\t，\tsometimes\n").unwrap_err();
        assert!(matches!(err, TableError::Malformed { line: 1, .. }));
        let err = PunctInventory::parse("a\t，\n").unwrap_err();
        assert!(matches!(err, TableError::Malformed { line: 1, .. }));
    }

    #[test]
    fn script_table_rejects_chains() {
        assert!(ScriptTable::parse("甲\t乙\n乙\t丙\n").is_err());
        assert!(ScriptTable::parse("甲\t乙丙\n").is_err());
        let t = ScriptTable::parse("甲\t乙\n丁\t乙\n").unwrap();
        assert!(!t.is_bijective());
    }

    #[test]
    fn builtin_script_table_round_trips() {
        let t = ScriptTable::builtin();
        assert!(t.is_bijective());
        for (trad, simp) in t.pairs() {
            assert_eq!(t.to_traditional(simp), Some(trad));
            assert_eq!(t.to_simplified(trad), Some(simp));
        }
    }

    fn punctuated_text() -> impl Strategy<Value = String> {
        let pieces = prop_oneof![
            prop::sample::select(vec!["春", "眠", "不", "觉", "晓", "衞", "州", "吁", "a", "1", " "]),
            prop::sample::select(vec![
                "，", "。", "、", "；", "：", "？", "！", "“", "”", "‘", "’", "《", "》", "（",
                "）", "——", "—", "……", "…", "·",
            ]),
        ];
        prop::collection::vec(pieces, 0..40).prop_map(|v| v.concat())
    }

    fn any_policy() -> impl Strategy<Value = NormPolicy> {
        (
            any::<bool>(),
            any::<bool>(),
            prop::sample::select(vec![
                ScriptMapping::Preserve,
                ScriptMapping::ToSimplified,
                ScriptMapping::ToTraditional,
            ]),
        )
            .prop_map(|(w, s, m)| NormPolicy {
                unicode_form: UnicodeForm::ComposedCanonical,
                width_folding: w,
                strip_controls: s,
                script_mapping: m,
            })
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(raw in "\\PC{0,30}|[\\x00-\\x7f衞卫殺杀國国，。、]{0,30}", policy in any_policy()) {
            let once = normalize_text(&raw, &policy);
            prop_assert_eq!(normalize_text(&once, &policy), once);
        }

        #[test]
        fn strip_then_reinsert_is_identity(text in punctuated_text()) {
            let ann = strip_punctuation(&text);
            prop_assert!(ann.marks.windows(2).all(|w| w[0].offset <= w[1].offset));
            prop_assert!(ann.marks.iter().all(|m| m.offset <= ann.base_len()));
            prop_assert!(!ann.base_text.chars().any(|c| PunctInventory::builtin().contains(c)));
            prop_assert_eq!(ann.reinsert(), text);
        }
    }
}
