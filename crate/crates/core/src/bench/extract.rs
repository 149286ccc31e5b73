//! Lenient answer extraction from free-form model responses.

use regex::Regex;

use crate::formats::{
    parse_entity_output_with, parse_slash_tags, serialize_slash_tags, EntityKeyAliases, EntitySet,
    TaggedSequence, Task,
};
use crate::textnorm::{is_cjk_ideograph, PunctInventory};

/// Default answer labels stripped from the start of a response.
pub const DEFAULT_PREAMBLES: &[&str] = &[
    r"^\s*(答案|回答|输出|结果|译文|翻译|解释|释义|标注结果|Answer|Output|Result|Translation)\s*[:：]\s*",
];

#[derive(Debug, Clone)]
pub struct Extractor {
    preambles: Vec<Regex>,
    aliases: EntityKeyAliases,
    inventory: PunctInventory,
}

impl Default for Extractor {
    fn default() -> Self {
        Self::new(
            DEFAULT_PREAMBLES,
            EntityKeyAliases::default(),
            PunctInventory::builtin().clone(),
        )
        .expect("default preamble patterns compile")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prediction {
    Text(String),
    Tags(TaggedSequence),
    Entities(EntitySet),
}

impl Prediction {
    pub fn empty(task: Task) -> Self {
        match task {
            Task::Pos => Prediction::Tags(TaggedSequence::default()),
            Task::Ner => Prediction::Entities(EntitySet::default()),
            _ => Prediction::Text(String::new()),
        }
    }

    pub fn render(&self) -> String {
        match self {
            Prediction::Text(t) => t.clone(),
            Prediction::Tags(seq) => serialize_slash_tags(seq).unwrap_or_else(|_| {
                seq.items
                    .iter()
                    .map(|i| format!("{}/{}", i.segment, i.tag))
                    .collect::<Vec<_>>()
                    .join(" ")
            }),
            Prediction::Entities(set) => set.to_schema_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub prediction: Prediction,
    /// Nothing usable was found; the prediction is empty.
    pub failed: bool,
}

impl Extractor {
    pub fn new(
        preambles: &[impl AsRef<str>],
        aliases: EntityKeyAliases,
        inventory: PunctInventory,
    ) -> Result<Self, regex::Error> {
        Ok(Self {
            preambles: preambles
                .iter()
                .map(|p| Regex::new(p.as_ref()))
                .collect::<Result<_, _>>()?,
            aliases,
            inventory,
        })
    }

    pub fn inventory(&self) -> &PunctInventory {
        &self.inventory
    }

    pub fn aliases(&self) -> &EntityKeyAliases {
        &self.aliases
    }

    fn strip_preamble<'a>(&self, line: &'a str) -> &'a str {
        for re in &self.preambles {
            if let Some(m) = re.find(line) {
                return &line[m.end()..];
            }
        }
        line
    }

    pub fn extract(&self, task: Task, response: &str) -> Extraction {
        let found = match task {
            Task::Pos => self.extract_tags(response).map(Prediction::Tags),
            Task::Punctuation => self.extract_punctuated(response).map(Prediction::Text),
            Task::Ner => parse_entity_output_with(response, &self.aliases)
                .ok()
                .map(Prediction::Entities),
            _ => {
                let text = self.extract_text(response);
                (!text.is_empty()).then_some(Prediction::Text(text))
            }
        };
        match found {
            Some(prediction) => Extraction {
                prediction,
                failed: false,
            },
            None => Extraction {
                prediction: Prediction::empty(task),
                failed: true,
            },
        }
    }

    /// First line holding a run of `segment/tag` tokens. Tokens before the
    /// run (labels, prose) and after it are ignored.
    fn extract_tags(&self, response: &str) -> Option<TaggedSequence> {
        for line in response.lines() {
            let line = self.strip_preamble(line);
            let tokens: Vec<&str> = line
                .split_whitespace()
                .skip_while(|t| !is_tag_token(t))
                .take_while(|t| is_tag_token(t))
                .collect();
            if tokens.is_empty() {
                continue;
            }
            if let Ok(seq) = parse_slash_tags(&tokens.join(" "), false) {
                return Some(seq);
            }
        }
        None
    }

    /// Longest run of ideographs and inventory marks that contains at
    /// least one mark; failing that, the longest ideograph run.
    fn extract_punctuated(&self, response: &str) -> Option<String> {
        let mut best: Option<(usize, bool, String)> = None;
        for line in response.lines() {
            let line = self.strip_preamble(line);
            let mut run = String::new();
            let mut len = 0;
            let mut marks = false;
            for c in line.chars().chain(std::iter::once('\n')) {
                let is_mark = self.inventory.contains(c);
                if is_cjk_ideograph(c) || is_mark {
                    run.push(c);
                    len += 1;
                    marks |= is_mark;
                    continue;
                }
                if len > 0 {
                    let better = match &best {
                        None => true,
                        Some((blen, bmarks, _)) => (marks, len) > (*bmarks, *blen),
                    };
                    if better && run.chars().any(is_cjk_ideograph) {
                        best = Some((len, marks, std::mem::take(&mut run)));
                    }
                }
                run.clear();
                len = 0;
                marks = false;
            }
        }
        best.map(|(_, _, text)| text)
    }

    /// The response with a leading answer label and code fences removed.
    fn extract_text(&self, response: &str) -> String {
        let body: Vec<&str> = response
            .trim()
            .lines()
            .filter(|l| !l.trim_start().starts_with("```"))
            .collect();
        let joined = body.join("\n");
        self.strip_preamble(joined.trim()).trim().to_owned()
    }
}

fn is_tag_token(t: &str) -> bool {
    t.rsplit_once('/')
        .is_some_and(|(seg, tag)| !seg.is_empty() && !tag.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEEPSEEK: &str = "四/m 年/t 春/t ，/w 衞/ns 州吁/nr 弑/v 桓公/nr 而/c 立/v 。/w";

    fn ex() -> Extractor {
        Extractor::default()
    }

    #[test]
    fn bare_pos_line() {
        let e = ex().extract(Task::Pos, DEEPSEEK);
        assert!(!e.failed);
        let Prediction::Tags(seq) = e.prediction else { panic!() };
        assert_eq!(seq.len(), 11);
    }

    #[test]
    fn pos_with_preamble() {
        let e = ex().extract(Task::Pos, "答案：四年/t 春/n ，/w 衞州吁/nr");
        let Prediction::Tags(seq) = e.prediction else { panic!() };
        assert_eq!(seq.len(), 4);
        assert_eq!(seq.items[0].segment, "四年");
        let e = ex().extract(Task::Pos, "下面是标注结果\n结果: 四年/t 春/n (完)");
        let Prediction::Tags(seq) = e.prediction else { panic!() };
        assert_eq!(seq.len(), 2);
    }

    #[test]
    fn pos_failure_is_flagged() {
        let e = ex().extract(Task::Pos, "I cannot tag this.");
        assert!(e.failed);
        assert_eq!(e.prediction, Prediction::Tags(TaggedSequence::default()));
    }

    #[test]
    fn ner_prose_is_flagged() {
        let e = ex().extract(Task::Ner, "天成初：时间，许州：地点，同平章事：官职。");
        assert!(e.failed);
        assert_eq!(e.prediction, Prediction::Entities(EntitySet::default()));
        let ok = ex().extract(
            Task::Ner,
            "'characters': [], 'place': ['许州'], 'time': ['天成初'], 'official positions': ['同平章事']",
        );
        assert!(!ok.failed);
    }

    #[test]
    fn punctuation_run() {
        let e = ex().extract(Task::Punctuation, "答案：四年春，衞州吁弑桓公而立。\nHope this helps");
        assert_eq!(e.prediction, Prediction::Text("四年春，衞州吁弑桓公而立。".into()));
        let e = ex().extract(Task::Punctuation, "加标点后为 “四年春，衞州吁弑桓公而立。” 。");
        assert_eq!(e.prediction, Prediction::Text("“四年春，衞州吁弑桓公而立。”".into()));
        let e = ex().extract(Task::Punctuation, "四年春衞州吁弑桓公而立");
        assert_eq!(e.prediction, Prediction::Text("四年春衞州吁弑桓公而立".into()));
        assert!(ex().extract(Task::Punctuation, "no idea").failed);
    }

    #[test]
    fn generation_text() {
        let e = ex().extract(Task::WordExplanation, "  解释：形容海棠花的色泽。 ");
        assert_eq!(e.prediction, Prediction::Text("形容海棠花的色泽。".into()));
        let e = ex().extract(Task::Translation, "```\n学了又温习\n```");
        assert_eq!(e.prediction, Prediction::Text("学了又温习".into()));
        assert!(ex().extract(Task::ReverseDictionary, "   ").failed);
    }
}
