//! Span-level and token-level precision / recall / F1.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{decode_bio_to_spans, Dataset, Span, TagSet, OUTSIDE};
use crate::tagger::TaggerParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SpanMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl SpanMetrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            precision,
            recall,
            f1: harmonic_mean(precision, recall),
            tp,
            fp,
            fn_,
        }
    }

    pub fn add(&self, other: &SpanMetrics) -> SpanMetrics {
        Self::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }
}

/// `2PR / (P + R)`, or 0 when both are 0.
pub fn harmonic_mean(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn check_shape(pred: &[Vec<usize>], gold: &[Vec<usize>]) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::Shape(format!(
            "{} predicted sentences vs {} gold sentences",
            pred.len(),
            gold.len()
        )));
    }
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.len() != g.len() {
            return Err(Error::Shape(format!(
                "sentence {i}: {} predicted labels vs {} gold labels",
                p.len(),
                g.len()
            )));
        }
    }
    Ok(())
}

/// Exact-match span scoring, micro-averaged over the corpus. Illegal BIO
/// transitions are repaired before spans are extracted.
pub fn span_prf(pred: &[Vec<usize>], gold: &[Vec<usize>], tagset: &TagSet) -> Result<SpanMetrics> {
    check_shape(pred, gold)?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, g) in pred.iter().zip(gold) {
        let ps: HashSet<Span> = decode_bio_to_spans(p, tagset).into_iter().collect();
        let gs: HashSet<Span> = decode_bio_to_spans(g, tagset).into_iter().collect();
        let hit = ps.intersection(&gs).count();
        tp += hit;
        fp += ps.len() - hit;
        fn_ += gs.len() - hit;
    }
    Ok(SpanMetrics::from_counts(tp, fp, fn_))
}

/// Token-level scores of selected pseudo labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenMetrics {
    #[serde(flatten)]
    pub metrics: SpanMetrics,
    /// Number of tokens in the scored population.
    pub tokens: usize,
    /// True when no token was selected, so the scores carry no information.
    pub empty: bool,
}

impl TokenMetrics {
    pub fn add(&self, other: &TokenMetrics) -> TokenMetrics {
        let tokens = self.tokens + other.tokens;
        TokenMetrics {
            metrics: self.metrics.add(&other.metrics),
            tokens,
            empty: tokens == 0,
        }
    }
}

/// Token-level P/R/F1 of `pseudo` against `gold` restricted to tokens with
/// `mask == true`. A token counts as a true positive when it is a correct
/// non-O label; predicted and gold positives are the non-O labels.
pub fn selected_label_f1(
    pseudo: &[Vec<usize>],
    mask: &[Vec<bool>],
    gold: Option<&[Vec<usize>]>,
) -> Result<TokenMetrics> {
    let gold = gold.ok_or(Error::MissingGold)?;
    check_shape(pseudo, gold)?;
    if mask.len() != pseudo.len() || mask.iter().zip(pseudo).any(|(m, p)| m.len() != p.len()) {
        return Err(Error::Shape("mask does not match pseudo labels".into()));
    }
    let (mut tp, mut fp, mut fn_, mut tokens) = (0, 0, 0, 0);
    for ((p, g), m) in pseudo.iter().zip(gold).zip(mask) {
        for ((&pl, &gl), &keep) in p.iter().zip(g).zip(m) {
            if !keep {
                continue;
            }
            tokens += 1;
            if pl == gl {
                if pl != OUTSIDE {
                    tp += 1;
                }
            } else {
                if pl != OUTSIDE {
                    fp += 1;
                }
                if gl != OUTSIDE {
                    fn_ += 1;
                }
            }
        }
    }
    Ok(TokenMetrics {
        metrics: SpanMetrics::from_counts(tp, fp, fn_),
        tokens,
        empty: tokens == 0,
    })
}

/// Span scores of a tagger's eval-mode predictions on `corpus` against the
/// corpus's gold labels. `ids` are the encoded sentences.
pub fn teacher_label_f1(
    teacher: &TaggerParams,
    ids: &[Vec<usize>],
    corpus: &Dataset,
) -> Result<SpanMetrics> {
    let gold = corpus.gold_labels().ok_or(Error::MissingGold)?;
    let pred = predict_all(teacher, ids)?;
    span_prf(&pred, &gold, &corpus.tagset)
}

pub fn predict_all(model: &TaggerParams, ids: &[Vec<usize>]) -> Result<Vec<Vec<usize>>> {
    ids.iter().map(|s| model.predict(s)).collect()
}

/// A conlleval-style summary with per-type lines.
pub fn conlleval_report(
    pred: &[Vec<usize>],
    gold: &[Vec<usize>],
    tagset: &TagSet,
) -> Result<String> {
    let overall = span_prf(pred, gold, tagset)?;
    let tokens: usize = gold.iter().map(Vec::len).sum();
    let correct_tokens: usize = pred
        .iter()
        .zip(gold)
        .map(|(p, g)| p.iter().zip(g).filter(|(a, b)| a == b).count())
        .sum();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "processed {tokens} tokens with {} phrases; found: {} phrases; correct: {}.",
        overall.tp + overall.fn_,
        overall.tp + overall.fp,
        overall.tp
    );
    let acc = if tokens == 0 {
        0.0
    } else {
        100.0 * correct_tokens as f64 / tokens as f64
    };
    let _ = writeln!(
        out,
        "accuracy: {acc:6.2}%; precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}",
        100.0 * overall.precision,
        100.0 * overall.recall,
        100.0 * overall.f1
    );
    for etype in 0..tagset.num_types() {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (p, g) in pred.iter().zip(gold) {
            let of_type = |l: &[usize]| -> HashSet<Span> {
                decode_bio_to_spans(l, tagset)
                    .into_iter()
                    .filter(|s| s.etype == etype)
                    .collect()
            };
            let (ps, gs) = (of_type(p), of_type(g));
            let hit = ps.intersection(&gs).count();
            tp += hit;
            fp += ps.len() - hit;
            fn_ += gs.len() - hit;
        }
        let m = SpanMetrics::from_counts(tp, fp, fn_);
        let _ = writeln!(
            out,
            "{:>17}: precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}  {}",
            tagset.type_name(etype),
            100.0 * m.precision,
            100.0 * m.recall,
            100.0 * m.f1,
            tp + fp
        );
    }
    Ok(out)
}
