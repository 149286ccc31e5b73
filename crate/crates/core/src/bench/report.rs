//! Result tables and radar data across models.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::evaluate::EvalRun;
use super::BenchError;
use crate::formats::Task;
use crate::metrics::MetricReport;

/// A rectangular table of already-formatted cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_markdown(&self) -> String {
        let mut out = format!("### {}\n\n", self.title);
        writeln!(out, "| {} |", self.header.join(" | ")).unwrap();
        let align: Vec<&str> = (0..self.header.len())
            .map(|i| if i == 0 { "---" } else { "---:" })
            .collect();
        writeln!(out, "| {} |", align.join(" | ")).unwrap();
        for row in &self.rows {
            writeln!(out, "| {} |", row.join(" | ")).unwrap();
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = row.iter().map(|c| csv_cell(c)).collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_owned()
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{:.2}", v * 100.0))
}

fn report_of(run: &EvalRun, task: Task) -> Option<&MetricReport> {
    run.tasks.get(&task).and_then(|s| s.metrics.as_ref())
}

fn prf_cells(run: &EvalRun, task: Task) -> [String; 3] {
    match report_of(run, task).and_then(|r| r.prf()) {
        Some(p) => [
            pct(Some(p.micro.precision)),
            pct(Some(p.micro.recall)),
            pct(Some(p.micro.f1)),
        ],
        None => ["-".into(), "-".into(), "-".into()],
    }
}

/// Punctuation, POS and NER precision/recall/F1 per model, in percent.
pub fn understanding_table(runs: &[EvalRun]) -> Table {
    let mut header = vec!["Model".to_owned()];
    for task in [Task::Punctuation, Task::Pos, Task::Ner] {
        for m in ["P", "R", "F1"] {
            header.push(format!("{} {m}", task.title()));
        }
    }
    let rows = runs
        .iter()
        .map(|run| {
            let mut row = vec![run.model.clone()];
            for task in [Task::Punctuation, Task::Pos, Task::Ner] {
                row.extend(prf_cells(run, task));
            }
            row
        })
        .collect();
    Table {
        title: "Understanding tasks (%)".into(),
        header,
        rows,
    }
}

/// Corpus BLEU-1..4 for translation and word explanation, and embedding
/// P/R/F1 for reverse dictionary, per model, in percent.
pub fn generation_table(runs: &[EvalRun]) -> Table {
    let mut header = vec!["Model".to_owned()];
    for task in [Task::Translation, Task::WordExplanation] {
        for n in 1..=4 {
            header.push(format!("{} BLEU-{n}", task.title()));
        }
    }
    for m in ["P", "R", "F1"] {
        header.push(format!("{} {m}", Task::ReverseDictionary.title()));
    }
    let rows = runs
        .iter()
        .map(|run| {
            let mut row = vec![run.model.clone()];
            for task in [Task::Translation, Task::WordExplanation] {
                match report_of(run, task).and_then(|r| r.bleu()) {
                    Some(b) => row.extend(b.corpus.bleu.iter().map(|v| pct(Some(*v)))),
                    None => row.extend(std::iter::repeat_n("-".to_owned(), 4)),
                }
            }
            match report_of(run, Task::ReverseDictionary).and_then(|r| r.embed()) {
                Some(e) => row.extend([
                    pct(Some(e.mean.precision)),
                    pct(Some(e.mean.recall)),
                    pct(Some(e.mean.f1)),
                ]),
                None => row.extend(std::iter::repeat_n("-".to_owned(), 3)),
            }
            row
        })
        .collect();
    Table {
        title: "Generation tasks (%)".into(),
        header,
        rows,
    }
}

/// Sentence-level mean BLEU, reported next to the corpus-level table.
pub fn sentence_bleu_table(runs: &[EvalRun]) -> Table {
    let mut t = generation_table(runs);
    t.title = "Generation tasks, mean sentence BLEU (%)".into();
    for (run, row) in runs.iter().zip(&mut t.rows) {
        for (k, task) in [Task::Translation, Task::WordExplanation].into_iter().enumerate() {
            if let Some(b) = report_of(run, task).and_then(|r| r.bleu()) {
                for n in 0..4 {
                    row[1 + k * 4 + n] = pct(Some(b.sentence_mean[n]));
                }
            }
        }
    }
    t
}

/// F1 per subcategory (punctuation class, POS tag, entity category).
pub fn subcategory_table(runs: &[EvalRun], task: Task) -> Table {
    let cats: BTreeSet<String> = runs
        .iter()
        .filter_map(|r| report_of(r, task).and_then(|m| m.prf()))
        .flat_map(|p| p.per_category.keys().cloned())
        .collect();
    let mut header = vec!["Model".to_owned()];
    header.extend(cats.iter().cloned());
    let rows = runs
        .iter()
        .map(|run| {
            let prf = report_of(run, task).and_then(|m| m.prf());
            let mut row = vec![run.model.clone()];
            row.extend(
                cats.iter()
                    .map(|c| pct(prf.and_then(|p| p.per_category.get(c)).map(|x| x.f1))),
            );
            row
        })
        .collect();
    Table {
        title: format!("{} F1 by subcategory (%)", task.title()),
        header,
        rows,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarSeries {
    pub model: String,
    /// One value per task, in `RadarPayload::tasks` order.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarPayload {
    /// False for a single model: values are then raw headline scores.
    pub normalized: bool,
    pub tasks: Vec<Task>,
    pub metrics: Vec<String>,
    pub series: Vec<RadarSeries>,
}

pub fn headline_name(task: Task) -> &'static str {
    match task {
        Task::Translation | Task::WordExplanation => "BLEU-1",
        Task::ReverseDictionary => "embedding F1",
        _ => "F1",
    }
}

/// `(x - min) / (max - min)` over the present values. When every model ties,
/// all of them map to 1.
pub fn min_max(values: &[Option<f64>]) -> Vec<Option<f64>> {
    let present = values.iter().flatten();
    let lo = present.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = present.copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| {
            v.map(|x| {
                if hi > lo {
                    (x - lo) / (hi - lo)
                } else {
                    1.0
                }
            })
        })
        .collect()
}

pub fn radar(runs: &[EvalRun]) -> RadarPayload {
    let tasks = Task::BENCH.to_vec();
    let raw: Vec<Vec<Option<f64>>> = runs
        .iter()
        .map(|r| {
            tasks
                .iter()
                .map(|t| r.tasks.get(t).and_then(|s| s.headline))
                .collect()
        })
        .collect();
    let normalized = runs.len() > 1;
    let mut values = raw.clone();
    if normalized {
        for (j, _) in tasks.iter().enumerate() {
            let column: Vec<Option<f64>> = raw.iter().map(|row| row[j]).collect();
            for (row, v) in values.iter_mut().zip(min_max(&column)) {
                row[j] = v;
            }
        }
    }
    RadarPayload {
        normalized,
        metrics: tasks.iter().map(|t| headline_name(*t).to_owned()).collect(),
        tasks,
        series: runs
            .iter()
            .zip(values)
            .map(|(r, values)| RadarSeries {
                model: r.model.clone(),
                values,
            })
            .collect(),
    }
}

/// Writes markdown, CSV and radar JSON into `dir`; returns the paths.
pub fn write_report(runs: &[EvalRun], dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    if runs.is_empty() {
        return Err(BenchError::Invalid("no runs to report".into()));
    }
    fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let mut tables = vec![
        ("understanding", understanding_table(runs)),
        ("generation", generation_table(runs)),
        ("generation_sentence_bleu", sentence_bleu_table(runs)),
    ];
    for (name, task) in [
        ("punctuation_classes", Task::Punctuation),
        ("pos_tags", Task::Pos),
        ("ner_categories", Task::Ner),
    ] {
        tables.push((name, subcategory_table(runs, task)));
    }
    let mut written = Vec::new();
    let mut md = String::from("# Benchmark results\n\n");
    for (name, t) in &tables {
        md.push_str(&t.to_markdown());
        md.push('\n');
        let path = dir.join(format!("{name}.csv"));
        fs::write(&path, t.to_csv()).map_err(|e| BenchError::io(&path, e))?;
        written.push(path);
    }
    let path = dir.join("report.md");
    fs::write(&path, md).map_err(|e| BenchError::io(&path, e))?;
    written.push(path);
    let path = dir.join("radar.json");
    let mut json = serde_json::to_string_pretty(&radar(runs)).expect("radar payload serializes");
    json.push('\n');
    fs::write(&path, json).map_err(|e| BenchError::io(&path, e))?;
    written.push(path);
    Ok(written)
}
