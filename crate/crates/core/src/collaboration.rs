//! Student-student label transfer.
//!
//! Within a batch each student scores every sentence by its mean eval-mode
//! cross-entropy against its own teacher's pseudo labels. The `floor(δ·B)`
//! lowest-scoring sentences are treated as reliable, and their pseudo labels
//! are handed to the *other* student, which trains on them unmasked.

use serde::{Deserialize, Serialize};

use crate::selection::PseudoLabels;
use crate::tagger::TaggerParams;
use crate::{Error, Result};

/// One network's view of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchView {
    /// Corpus indices of the batch sentences, in batch order.
    pub sentences: Vec<usize>,
    /// Pseudo labels from this network's teacher.
    pub pseudo: Vec<PseudoLabels>,
    /// Small-loss score per sentence.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    /// Position inside the batch.
    pub position: usize,
    pub sentence: usize,
    pub labels: Vec<usize>,
}

/// `received[n]` lists what network `n` adopts from the other network.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransferPlan {
    pub received: [Vec<Transfer>; 2],
}

impl TransferPlan {
    pub fn is_empty(&self) -> bool {
        self.received.iter().all(Vec::is_empty)
    }

    /// Overwrites the receiver's pseudo labels with the donor's for every
    /// transferred sentence; those tokens become `Transferred`.
    pub fn apply(&self, receiver: usize, donor: &BatchView, pseudo: &mut [PseudoLabels]) {
        for t in &self.received[receiver] {
            pseudo[t.position].replace_with_transferred(&donor.pseudo[t.position]);
        }
    }
}

/// Mean per-token eval-mode cross-entropy of `student` against each sentence's pseudo labels.
pub fn score_small_loss(
    student: &TaggerParams,
    ids: &[&[usize]],
    pseudo: &[PseudoLabels],
) -> Result<Vec<f64>> {
    if ids.len() != pseudo.len() {
        return Err(Error::Shape("every sentence needs pseudo labels".into()));
    }
    ids.iter()
        .zip(pseudo)
        .map(|(s, p)| {
            if p.len() != s.len() {
                return Err(Error::Shape(
                    "pseudo labels do not match sentence length".into(),
                ));
            }
            let logp = student.log_probs(s)?;
            let ce: f64 = p
                .labels
                .iter()
                .enumerate()
                .map(|(i, &l)| -logp[[i, l]])
                .sum();
            Ok(ce / s.len() as f64)
        })
        .collect()
}

/// `floor(δ·B)`; products within 1e-9 below an integer count as that integer.
pub fn selection_count(delta: f64, batch: usize) -> usize {
    ((delta * batch as f64) + 1e-9).floor().min(batch as f64) as usize
}

/// Positions of the `floor(δ·B)` smallest scores, ties to the lower position,
/// returned in ascending score order.
pub fn select_small_loss(scores: &[f64], delta: f64) -> Result<Vec<usize>> {
    check_delta(delta)?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Shape("small-loss scores must be finite".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    order.truncate(selection_count(delta, scores.len()));
    Ok(order)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::config(format!(
            "transfer ratio {delta} outside [0, 1]"
        )));
    }
    Ok(())
}

pub fn select_and_transfer(
    view_1: &BatchView,
    view_2: &BatchView,
    delta: f64,
) -> Result<TransferPlan> {
    check_delta(delta)?;
    if view_1.sentences != view_2.sentences {
        return Err(Error::Shape("views cover different batches".into()));
    }
    for v in [view_1, view_2] {
        if v.pseudo.len() != v.sentences.len() || v.scores.len() != v.sentences.len() {
            return Err(Error::Shape("view has inconsistent lengths".into()));
        }
    }
    let donate = |donor: &BatchView| -> Result<Vec<Transfer>> {
        Ok(select_small_loss(&donor.scores, delta)?
            .into_iter()
            .map(|pos| Transfer {
                position: pos,
                sentence: donor.sentences[pos],
                labels: donor.pseudo[pos].labels.clone(),
            })
            .collect())
    };
    Ok(TransferPlan {
        received: [donate(view_2)?, donate(view_1)?],
    })
}

/// Per-epoch transfer statistics for one donor network.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    /// Sentences donated to the other network.
    pub transferred: usize,
    pub kept: usize,
    pub mean_loss_transferred: f64,
    pub mean_loss_kept: f64,
}

impl TransferReport {
    pub fn record(&mut self, scores: &[f64], donated: &[Transfer]) {
        let mut chosen = vec![false; scores.len()];
        for t in donated {
            chosen[t.position] = true;
        }
        for (s, c) in scores.iter().zip(chosen) {
            if c {
                self.mean_loss_transferred =
                    running(self.mean_loss_transferred, self.transferred, *s);
                self.transferred += 1;
            } else {
                self.mean_loss_kept = running(self.mean_loss_kept, self.kept, *s);
                self.kept += 1;
            }
        }
    }
}

fn running(mean: f64, n: usize, x: f64) -> f64 {
    (mean * n as f64 + x) / (n + 1) as f64
}
