use std::collections::HashMap;
use std::fmt::Write as _;

use crate::corpus::{Dataset, Sentence, TagSet, OUTSIDE};
use crate::{Error, Result};

/// Surface string (as a token sequence) → entity types, first type preferred.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gazetteer {
    entries: HashMap<Vec<String>, Vec<usize>>,
    max_entry_len: usize,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, surface: Vec<String>, types: Vec<usize>) -> Result<()> {
        if surface.is_empty() || surface.iter().any(|t| t.is_empty()) {
            return Err(Error::config("gazetteer surface must be non-empty"));
        }
        if types.is_empty() {
            return Err(Error::config(format!(
                "gazetteer entry `{}` has no type",
                surface.join(" ")
            )));
        }
        if self.entries.contains_key(&surface) {
            return Err(Error::config(format!(
                "duplicate gazetteer entry `{}`",
                surface.join(" ")
            )));
        }
        self.max_entry_len = self.max_entry_len.max(surface.len());
        self.entries.insert(surface, types);
        Ok(())
    }

    pub fn lookup(&self, surface: &[String]) -> Option<&[usize]> {
        self.entries.get(surface).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_entry_len(&self) -> usize {
        self.max_entry_len
    }

    /// Parses `<surface>\t<type>[,<type>...]` lines; surface tokens are space-separated.
    pub fn parse(text: &str, tagset: &TagSet) -> Result<Self> {
        let mut g = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (surface, types) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: line_no,
                message: "expected `<surface><TAB><types>`".into(),
            })?;
            let types = types
                .split(',')
                .map(|t| {
                    tagset.type_index(t.trim()).ok_or_else(|| Error::Parse {
                        line: line_no,
                        message: format!("unknown entity type `{t}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let surface: Vec<String> = surface.split(' ').map(str::to_string).collect();
            g.insert(surface, types).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        }
        Ok(g)
    }

    /// One line per entry, sorted by surface.
    pub fn to_text(&self, tagset: &TagSet) -> String {
        let mut keys: Vec<&Vec<String>> = self.entries.keys().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            let types: Vec<&str> = self.entries[k]
                .iter()
                .map(|&t| tagset.type_name(t))
                .collect();
            let _ = writeln!(out, "{}\t{}", k.join(" "), types.join(","));
        }
        out
    }
}

/// Greedy left-to-right longest match; a match takes the entry's first type.
pub fn match_gazetteer(tokens: &[String], gazetteer: &Gazetteer, tagset: &TagSet) -> Vec<usize> {
    let mut labels = vec![OUTSIDE; tokens.len()];
    let mut i = 0;
    while i < tokens.len() {
        let longest = gazetteer.max_entry_len().min(tokens.len() - i);
        let hit = (1..=longest).rev().find_map(|len| {
            gazetteer
                .lookup(&tokens[i..i + len])
                .map(|types| (len, types[0]))
        });
        match hit {
            Some((len, etype)) => {
                labels[i] = tagset.begin(etype);
                for l in &mut labels[i + 1..i + len] {
                    *l = tagset.inside(etype);
                }
                i += len;
            }
            None => i += 1,
        }
    }
    labels
}

/// Relabels every sentence by gazetteer matching; the original labels become
/// the gold reference.
pub fn distant_label(clean: &Dataset, gazetteer: &Gazetteer, name: &str) -> Result<Dataset> {
    let sentences = clean
        .sentences
        .iter()
        .map(|s| {
            let labels = match_gazetteer(&s.tokens, gazetteer, &clean.tagset);
            Sentence::new(s.tokens.clone(), labels)?.with_gold(s.labels.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(name, clean.tagset.clone(), sentences)
}
