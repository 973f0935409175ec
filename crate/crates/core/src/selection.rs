//! Uncertainty-aware selection of teacher pseudo labels.
//!
//! A token's pseudo label is the teacher's eval-mode argmax `ŷ`. Its
//! confidence is `p(ŷ)` and its uncertainty is the population variance of
//! `p(ŷ)` across `K` Monte Carlo dropout passes. A token is kept for the
//! student's loss iff `s_un < σ_ua` and `s_co > σ_co`, or its label was
//! transferred from the other student.

use serde::{Deserialize, Serialize};

use crate::evaluation::TokenMetrics;
use crate::tagger::{argmax, ForwardMode, TaggerParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelSource {
    Teacher,
    Transferred,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabels {
    pub labels: Vec<usize>,
    pub confidence: Vec<f64>,
    pub source: Vec<LabelSource>,
}

impl PseudoLabels {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Takes over a donor's labels wholesale, marking every token transferred.
    pub fn replace_with_transferred(&mut self, donor: &PseudoLabels) {
        self.labels.clone_from(&donor.labels);
        self.confidence.clone_from(&donor.confidence);
        self.source = vec![LabelSource::Transferred; donor.len()];
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyScores {
    pub scores: Vec<f64>,
    pub passes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskMatrix {
    pub mask: Vec<bool>,
}

impl MaskMatrix {
    pub fn weights(&self) -> Vec<f64> {
        self.mask
            .iter()
            .map(|&m| if m { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn unmasked(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Selection thresholds. `sigma_ua` may be `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub sigma_co: f64,
    pub sigma_ua: f64,
}

pub fn predict_pseudo_labels(teacher: &TaggerParams, ids: &[usize]) -> Result<PseudoLabels> {
    let probs = teacher.forward(ids, ForwardMode::Eval)?;
    let (labels, confidence) = probs.rows().into_iter().map(argmax).unzip();
    Ok(PseudoLabels {
        labels,
        confidence,
        source: vec![LabelSource::Teacher; ids.len()],
    })
}

/// Per-token population variance of the pseudo label's probability over
/// `passes` dropout passes with mask streams `mix(base_seed, k, sentence)`.
pub fn estimate_uncertainty(
    teacher: &TaggerParams,
    ids: &[usize],
    pseudo: &PseudoLabels,
    passes: usize,
    base_seed: u64,
    sentence: usize,
) -> Result<UncertaintyScores> {
    if passes < 2 {
        return Err(Error::config(format!(
            "uncertainty needs at least 2 passes, got {passes}"
        )));
    }
    let p = teacher.mc_label_probs(ids, &pseudo.labels, passes, base_seed, sentence)?;
    let scores = p
        .columns()
        .into_iter()
        .map(|col| population_variance(col.iter().copied()))
        .collect();
    Ok(UncertaintyScores { scores, passes })
}

pub(crate) fn population_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

pub fn build_mask(pseudo: &PseudoLabels, unc: &UncertaintyScores, th: Thresholds) -> MaskMatrix {
    let mask = (0..pseudo.len())
        .map(|i| {
            pseudo.source[i] == LabelSource::Transferred
                || (unc.scores[i] < th.sigma_ua && pseudo.confidence[i] > th.sigma_co)
        })
        .collect();
    MaskMatrix { mask }
}

/// Running per-epoch selection statistics for one network.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub tokens: usize,
    pub unmasked: usize,
    pub masked: usize,
    /// Masked among teacher-sourced tokens only.
    pub teacher_tokens: usize,
    pub teacher_masked: usize,
    pub mean_confidence: f64,
    pub mean_uncertainty: f64,
    /// Token-level scores of unmasked pseudo labels against gold.
    pub selected: Option<TokenMetrics>,
    /// Token-level scores of masked pseudo labels against gold.
    pub unselected: Option<TokenMetrics>,
}

impl SelectionReport {
    pub fn record(&mut self, pseudo: &PseudoLabels, unc: &UncertaintyScores, mask: &MaskMatrix) {
        let n = pseudo.len();
        let total = (self.tokens + n) as f64;
        let co: f64 = pseudo.confidence.iter().sum();
        let un: f64 = unc.scores.iter().sum();
        // running means keep the report independent of batch boundaries
        self.mean_confidence = (self.mean_confidence * self.tokens as f64 + co) / total;
        self.mean_uncertainty = (self.mean_uncertainty * self.tokens as f64 + un) / total;
        self.tokens += n;
        let kept = mask.unmasked();
        self.unmasked += kept;
        self.masked += n - kept;
        for (src, &m) in pseudo.source.iter().zip(&mask.mask) {
            if *src == LabelSource::Teacher {
                self.teacher_tokens += 1;
                if !m {
                    self.teacher_masked += 1;
                }
            }
        }
    }

    pub fn record_quality(&mut self, selected: TokenMetrics, unselected: TokenMetrics) {
        self.selected = Some(self.selected.map_or(selected, |s| s.add(&selected)));
        self.unselected = Some(self.unselected.map_or(unselected, |s| s.add(&unselected)));
    }

    pub fn masked_fraction(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.masked as f64 / self.tokens as f64
        }
    }
}
