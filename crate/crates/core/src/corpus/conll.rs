//! Two-column CoNLL files: `<token> <tag>` per line (single space or tab),
//! one blank line between sentences. The writer always emits a single space
//! and terminates every sentence with a blank line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Dataset, Sentence, TagSet};
use crate::{Error, Result};

pub fn parse_conll(text: &str, tagset: &TagSet, name: &str) -> Result<Dataset> {
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut labels = Vec::new();

    let mut flush = |tokens: &mut Vec<String>, labels: &mut Vec<usize>| {
        if !tokens.is_empty() {
            sentences.push(Sentence {
                tokens: std::mem::take(tokens),
                labels: std::mem::take(labels),
                gold_labels: None,
            });
        }
    };

    for (i, raw) in text.split('\n').enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            flush(&mut tokens, &mut labels);
            continue;
        }
        let cols: Vec<&str> = line.split([' ', '\t']).collect();
        if cols.len() != 2 || cols.iter().any(|c| c.is_empty()) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected `<token> <tag>`, found {} column(s)", cols.len()),
            });
        }
        let label = tagset
            .label_index(cols[1])
            .ok_or_else(|| Error::UnknownTag {
                line: line_no,
                tag: cols[1].to_string(),
            })?;
        tokens.push(cols[0].to_string());
        labels.push(label);
    }
    flush(&mut tokens, &mut labels);
    Dataset::new(name, tagset.clone(), sentences)
}

pub fn write_conll(dataset: &Dataset) -> String {
    let mut out = String::new();
    for s in &dataset.sentences {
        for (tok, &l) in s.tokens.iter().zip(&s.labels) {
            let _ = writeln!(out, "{tok} {}", dataset.tagset.label_name(l));
        }
        out.push('\n');
    }
    out
}

pub fn read_conll(path: impl AsRef<Path>, tagset: &TagSet) -> Result<Dataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    fs::read_to_string(path)
        .map_err(Error::from)
        .and_then(|text| parse_conll(&text, tagset, &name))
        .map_err(|e| e.in_file(path))
}

pub fn write_conll_file(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_conll(dataset)).map_err(|e| Error::from(e).in_file(path))
}
