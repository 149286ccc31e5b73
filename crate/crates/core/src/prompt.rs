//! Prompt templates with `{name}` placeholders.
//!
//! The bundled templates live in `templates/` and can be overridden by a
//! directory holding files with the same names.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::formats::Task;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template {template:?} has no value for {{{name}}}")]
    Missing { template: String, name: String },
    #[error("template {template:?} uses unknown placeholder {{{name}}}")]
    Unknown { template: String, name: String },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: String,
    pub text: String,
}

impl Template {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            text: text.into(),
        }
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (_, name, _) in scan(&self.text) {
            if !out.iter().any(|n| n == name) {
                out.push(name.to_owned());
            }
        }
        out
    }

    /// Substitutes every `{name}` in one pass; substituted values are not
    /// rescanned, so braces inside them are safe.
    pub fn render(&self, vars: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.text.len());
        let mut last = 0;
        for (start, name, end) in scan(&self.text) {
            let value = vars
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| TemplateError::Missing {
                    template: self.name.clone(),
                    name: name.to_owned(),
                })?;
            out.push_str(&self.text[last..start]);
            out.push_str(value);
            last = end;
        }
        out.push_str(&self.text[last..]);
        Ok(out)
    }
}

/// `(start, name, end)` for each `{name}` with a lowercase ASCII name.
fn scan(text: &str) -> Vec<(usize, &str, usize)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_') {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b'}' {
                out.push((i, &text[i + 1..j], j + 1));
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    out
}

const BUILTIN: &[(&str, &str)] = &[
    ("answer", include_str!("../templates/answer.txt")),
    ("expand_ner", include_str!("../templates/expand_ner.txt")),
    ("reverse_ner", include_str!("../templates/reverse_ner.txt")),
    ("expand_generic", include_str!("../templates/expand_generic.txt")),
    ("reverse_generic", include_str!("../templates/reverse_generic.txt")),
    ("seed_punctuation", include_str!("../templates/seed_punctuation.txt")),
    ("seed_pos", include_str!("../templates/seed_pos.txt")),
    ("seed_ner", include_str!("../templates/seed_ner.txt")),
    ("seed_translation", include_str!("../templates/seed_translation.txt")),
    ("seed_word_explanation", include_str!("../templates/seed_word_explanation.txt")),
    ("seed_reverse_dictionary", include_str!("../templates/seed_reverse_dictionary.txt")),
];

fn builtin_text(name: &str) -> &'static str {
    BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .map_or("", |(_, t)| *t)
}

#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: Vec<Template>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    pub fn builtin() -> Self {
        Self {
            templates: BUILTIN
                .iter()
                .map(|(n, t)| Template::new(*n, t.trim_end_matches('\n')))
                .collect(),
        }
    }

    /// Built-in templates, replaced by `<name>.txt` files found in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::builtin();
        for t in &mut set.templates {
            let path = dir.join(format!("{}.txt", t.name));
            if path.is_file() {
                t.text = fs::read_to_string(&path)
                    .map_err(|e| TemplateError::Io(format!("{}: {e}", path.display())))?
                    .trim_end_matches('\n')
                    .to_owned();
                let allowed = Template::new("", builtin_text(&t.name)).placeholders();
                if let Some(bad) = t.placeholders().into_iter().find(|p| !allowed.contains(p)) {
                    return Err(TemplateError::Unknown {
                        template: t.name.clone(),
                        name: bad,
                    });
                }
            }
        }
        Ok(set)
    }

    pub fn get(&self, name: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.name == name)
    }

    fn named(&self, name: &str) -> &Template {
        self.get(name).expect("built-in template names are fixed")
    }

    /// The prompt sent for one (instruction, input) pair.
    pub fn answer_prompt(&self, instruction: &str, input: &str) -> String {
        if input.is_empty() {
            return instruction.to_owned();
        }
        self.named("answer")
            .render(&[("instruction", instruction), ("input", input)])
            .expect("answer template takes instruction and input")
    }

    pub fn seed(&self, task: Task) -> Option<&str> {
        self.get(&format!("seed_{}", task.name())).map(|t| t.text.as_str())
    }

    pub fn expand_prompt(&self, task: Task, instruction: &str) -> Result<String, TemplateError> {
        if task == Task::Ner {
            self.named("expand_ner").render(&[("instruction", instruction)])
        } else {
            self.named("expand_generic").render(&[
                ("instruction", instruction),
                ("task", task.title()),
                ("format", format_hint(task)),
            ])
        }
    }

    pub fn reverse_prompt(&self, task: Task, input: &str, output: &str) -> Result<String, TemplateError> {
        if task == Task::Ner {
            self.named("reverse_ner")
                .render(&[("input", input), ("output", output)])
        } else {
            self.named("reverse_generic").render(&[
                ("input", input),
                ("output", output),
                ("task", task.title()),
                ("format", format_hint(task)),
            ])
        }
    }
}

/// Short description of the answer format a task expects.
pub fn format_hint(task: Task) -> &'static str {
    match task {
        Task::Punctuation => "the original text with punctuation marks inserted",
        Task::Pos => "space-separated word/tag pairs",
        Task::Ner => "'characters': [...], 'place': [...], 'time': [...], 'official positions': [...]",
        Task::Translation => "a modern Chinese translation",
        Task::WordExplanation => "a short explanation",
        Task::ReverseDictionary => "a single word",
        Task::Other => "free text",
    }
}
