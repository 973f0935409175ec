use serde::{Deserialize, Serialize};

use super::{Tag, TagSet, OUTSIDE};
use crate::{Error, Result};

/// An entity mention covering tokens `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub etype: usize,
}

impl Span {
    pub fn new(start: usize, end: usize, etype: usize) -> Self {
        Self { start, end, etype }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Maximal spans of a label sequence. An `I-t` that does not continue an
/// open `t` span starts a new one, as if it were `B-t`.
pub fn decode_bio_to_spans(labels: &[usize], tagset: &TagSet) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<Span> = None;
    for (i, &l) in labels.iter().enumerate() {
        match tagset.tag(l) {
            Tag::Outside => spans.extend(open.take()),
            Tag::Begin(t) => {
                spans.extend(open.take());
                open = Some(Span::new(i, i, t));
            }
            Tag::Inside(t) => match open.as_mut() {
                Some(span) if span.etype == t => span.end = i,
                _ => {
                    spans.extend(open.take());
                    open = Some(Span::new(i, i, t));
                }
            },
        }
    }
    spans.extend(open);
    spans
}

pub fn encode_spans_to_bio(spans: &[Span], length: usize, tagset: &TagSet) -> Result<Vec<usize>> {
    let mut sorted = spans.to_vec();
    sorted.sort();
    for s in &sorted {
        if s.start > s.end || s.end >= length {
            return Err(Error::Shape(format!(
                "span ({}, {}) outside sentence of length {length}",
                s.start, s.end
            )));
        }
        if s.etype >= tagset.num_types() {
            return Err(Error::Shape(format!(
                "span entity type {} outside tag set",
                s.etype
            )));
        }
    }
    for pair in sorted.windows(2) {
        if pair[1].start <= pair[0].end {
            let show = |s: &Span| format!("({},{},{})", s.start, s.end, tagset.type_name(s.etype));
            return Err(Error::Overlap {
                first: show(&pair[0]),
                second: show(&pair[1]),
            });
        }
    }
    let mut labels = vec![OUTSIDE; length];
    for s in &sorted {
        labels[s.start] = tagset.begin(s.etype);
        for l in &mut labels[s.start + 1..=s.end] {
            *l = tagset.inside(s.etype);
        }
    }
    Ok(labels)
}

pub fn is_bio_legal(labels: &[usize], tagset: &TagSet) -> bool {
    let mut prev = Tag::Outside;
    for &l in labels {
        let tag = tagset.tag(l);
        if let Tag::Inside(t) = tag {
            match prev {
                Tag::Begin(p) | Tag::Inside(p) if p == t => {}
                _ => return false,
            }
        }
        prev = tag;
    }
    true
}

pub fn repair_bio(labels: &[usize], tagset: &TagSet) -> Vec<usize> {
    let spans = decode_bio_to_spans(labels, tagset);
    encode_spans_to_bio(&spans, labels.len(), tagset).expect("decoded spans never overlap")
}
