//! Tokenized, BIO-labelled text.
//!
//! Labels are plain `usize` indices into a [`TagSet`]'s alphabet. Index 0 is
//! always `O`; entity type `t` (0-based) owns `B-t` at `1 + 2t` and `I-t` at
//! `2 + 2t`.

mod bio;
mod conll;
mod vocab;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use bio::{decode_bio_to_spans, encode_spans_to_bio, is_bio_legal, repair_bio, Span};
pub use conll::{parse_conll, read_conll, write_conll, write_conll_file};
pub use vocab::{build_vocabulary, Vocabulary, PAD, UNK};

use crate::{Error, Result};

pub const OUTSIDE: usize = 0;

/// A decoded label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Outside,
    Begin(usize),
    Inside(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TagSet {
    entity_types: Vec<String>,
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl TagSet {
    pub fn new<S: AsRef<str>>(entity_types: &[S]) -> Result<Self> {
        let mut types = Vec::with_capacity(entity_types.len());
        for t in entity_types {
            let t = t.as_ref();
            if t.is_empty() || t.contains('-') || t.chars().any(char::is_whitespace) {
                return Err(Error::TagSet(format!(
                    "entity type `{t}` must be non-empty without whitespace or hyphens"
                )));
            }
            if types.iter().any(|seen: &String| seen == t) {
                return Err(Error::TagSet(format!("duplicate entity type `{t}`")));
            }
            types.push(t.to_string());
        }
        let mut labels = vec!["O".to_string()];
        for t in &types {
            labels.push(format!("B-{t}"));
            labels.push(format!("I-{t}"));
        }
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Ok(Self {
            entity_types: types,
            labels,
            index,
        })
    }

    /// The four CoNLL03 types.
    pub fn conll03() -> Self {
        Self::new(&["PER", "LOC", "ORG", "MISC"]).expect("static tag set")
    }

    pub fn entity_types(&self) -> &[String] {
        &self.entity_types
    }

    pub fn num_types(&self) -> usize {
        self.entity_types.len()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_name(&self, label: usize) -> &str {
        &self.labels[label]
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.entity_types.iter().position(|t| t == name)
    }

    pub fn type_name(&self, etype: usize) -> &str {
        &self.entity_types[etype]
    }

    pub fn begin(&self, etype: usize) -> usize {
        1 + 2 * etype
    }

    pub fn inside(&self, etype: usize) -> usize {
        2 + 2 * etype
    }

    pub fn tag(&self, label: usize) -> Tag {
        match label {
            0 => Tag::Outside,
            l if l % 2 == 1 => Tag::Begin((l - 1) / 2),
            l => Tag::Inside((l - 2) / 2),
        }
    }

    pub fn is_valid(&self, label: usize) -> bool {
        label < self.labels.len()
    }
}

impl TryFrom<Vec<String>> for TagSet {
    type Error = Error;

    fn try_from(types: Vec<String>) -> Result<Self> {
        TagSet::new(&types)
    }
}

impl From<TagSet> for Vec<String> {
    fn from(t: TagSet) -> Self {
        t.entity_types
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub labels: Vec<usize>,
    /// Clean reference labels, when known.
    pub gold_labels: Option<Vec<usize>>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>, labels: Vec<usize>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Shape(
                "sentence must contain at least one token".into(),
            ));
        }
        if tokens.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} tokens but {} labels",
                tokens.len(),
                labels.len()
            )));
        }
        Ok(Self {
            tokens,
            labels,
            gold_labels: None,
        })
    }

    pub fn with_gold(mut self, gold: Vec<usize>) -> Result<Self> {
        if gold.len() != self.tokens.len() {
            return Err(Error::Shape(format!(
                "{} tokens but {} gold labels",
                self.tokens.len(),
                gold.len()
            )));
        }
        self.gold_labels = Some(gold);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub tagset: TagSet,
    pub sentences: Vec<Sentence>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, tagset: TagSet, sentences: Vec<Sentence>) -> Result<Self> {
        for (i, s) in sentences.iter().enumerate() {
            let bad = s
                .labels
                .iter()
                .chain(s.gold_labels.iter().flatten())
                .find(|&&l| !tagset.is_valid(l));
            if let Some(l) = bad {
                return Err(Error::Shape(format!(
                    "sentence {i}: label index {l} outside tag set"
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            tagset,
            sentences,
        })
    }

    /// Total token count N.
    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn labels(&self) -> Vec<Vec<usize>> {
        self.sentences.iter().map(|s| s.labels.clone()).collect()
    }

    /// Gold labels for every sentence, or `None` if any sentence lacks them.
    pub fn gold_labels(&self) -> Option<Vec<Vec<usize>>> {
        self.sentences
            .iter()
            .map(|s| s.gold_labels.clone())
            .collect()
    }

    /// Replaces every label sequence by its BIO-legal repair.
    pub fn repair_bio(&mut self) {
        for s in &mut self.sentences {
            s.labels = repair_bio(&s.labels, &self.tagset);
        }
    }

    /// Attaches `gold`'s labels as this dataset's clean reference.
    pub fn attach_gold(&mut self, gold: &Dataset) -> Result<()> {
        if gold.sentences.len() != self.sentences.len() {
            return Err(Error::Shape(format!(
                "{} sentences but {} gold sentences",
                self.sentences.len(),
                gold.sentences.len()
            )));
        }
        for (i, (s, g)) in self.sentences.iter_mut().zip(&gold.sentences).enumerate() {
            if s.tokens != g.tokens {
                return Err(Error::Shape(format!("sentence {i}: gold tokens differ")));
            }
            s.gold_labels = Some(g.labels.clone());
        }
        Ok(())
    }
}
