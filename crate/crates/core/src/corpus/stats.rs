use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::RawDocument;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeRow {
    pub source: String,
    pub docs: usize,
    /// UTF-8 bytes of document text.
    pub bytes: usize,
}

/// Per-source sizes, sorted by source id, with a totals row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeTable {
    pub rows: Vec<SizeRow>,
    pub total: SizeRow,
}

pub fn stats<'a>(docs: impl IntoIterator<Item = &'a RawDocument>) -> SizeTable {
    let mut by_source: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for d in docs {
        let e = by_source.entry(d.source_id.as_str()).or_default();
        e.0 += 1;
        e.1 += d.text.len();
    }
    let rows: Vec<SizeRow> = by_source
        .into_iter()
        .map(|(source, (docs, bytes))| SizeRow {
            source: source.to_owned(),
            docs,
            bytes,
        })
        .collect();
    let total = SizeRow {
        source: "total".into(),
        docs: rows.iter().map(|r| r.docs).sum(),
        bytes: rows.iter().map(|r| r.bytes).sum(),
    };
    SizeTable { rows, total }
}

/// Binary-unit size in the style `853M`, `5.2G`.
pub fn format_size(bytes: usize) -> String {
    const UNITS: [&str; 5] = ["B", "K", "M", "G", "T"];
    let mut v = bytes as f64;
    let mut unit = 0;
    while v >= 1024.0 && unit < UNITS.len() - 1 {
        v /= 1024.0;
        unit += 1;
    }
    if unit == 0 {
        format!("{bytes}B")
    } else if v < 10.0 {
        format!("{v:.1}{}", UNITS[unit])
    } else {
        format!("{:.0}{}", v, UNITS[unit])
    }
}

impl SizeTable {
    fn all_rows(&self) -> impl Iterator<Item = &SizeRow> {
        self.rows.iter().chain(std::iter::once(&self.total))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("source\tdocs\tbytes\n");
        for r in self.all_rows() {
            writeln!(out, "{}\t{}\t{}", r.source, r.docs, r.bytes).unwrap();
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Source | Docs | Size |\n|---|---:|---:|\n");
        for r in self.all_rows() {
            writeln!(out, "| {} | {} | {} |", r.source, r.docs, format_size(r.bytes)).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(source: &str, text: &str) -> RawDocument {
        RawDocument {
            source_id: source.into(),
            path: String::new(),
            text: text.into(),
            meta: Default::default(),
        }
    }

    #[test]
    fn one_source() {
        let docs = vec![doc("a", "0123456789"); 3];
        let t = stats(&docs);
        assert_eq!(t.rows.len(), 1);
        assert_eq!((t.total.docs, t.total.bytes), (3, 30));
    }

    #[test]
    fn empty_stream() {
        let t = stats(&[]);
        assert!(t.rows.is_empty());
        assert_eq!((t.total.docs, t.total.bytes), (0, 0));
        assert_eq!(t.to_tsv(), "source\tdocs\tbytes\ntotal\t0\t0\n");
    }

    #[test]
    fn sizes() {
        assert_eq!(format_size(512), "512B");
        assert_eq!(format_size(853 * 1024 * 1024), "853M");
        assert_eq!(format_size(5_583_457_484), "5.2G");
    }

    #[test]
    fn markdown_has_totals_row() {
        let t = stats(&[doc("b", "春"), doc("a", "眠")]);
        let md = t.to_markdown();
        assert!(md.contains("| a | 1 | 3B |\n| b | 1 | 3B |\n| total | 2 | 6B |"));
    }

    proptest! {
        #[test]
        fn totals_are_additive(items in prop::collection::vec(("[abc]", "[春眠x]{0,5}"), 0..20), cut in 0usize..20) {
            let docs: Vec<_> = items.iter().map(|(s, t)| doc(s, t)).collect();
            let cut = cut.min(docs.len());
            let whole = stats(&docs).total;
            let (l, r) = (stats(&docs[..cut]).total, stats(&docs[cut..]).total);
            prop_assert_eq!(whole.docs, l.docs + r.docs);
            prop_assert_eq!(whole.bytes, l.bytes + r.bytes);
            let t = stats(&docs);
            prop_assert_eq!(t.rows.iter().map(|r| r.bytes).sum::<usize>(), t.total.bytes);
        }
    }
}
