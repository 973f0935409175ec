use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{decode_bio_to_spans, Dataset, OUTSIDE};
use crate::rng::{mix, seeded, stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Relabel the whole span with a different entity type.
    ReplaceType,
    /// Relabel the whole span as O.
    DropToO,
    /// Alternate between the two along the perturbation order.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// k, the percentage of entity spans to perturb.
    pub ratio_percent: f64,
    pub mode: NoiseMode,
    pub seed: u64,
}

/// `round(k/100 · E)`, halves rounded up.
pub fn perturbation_count(ratio_percent: f64, spans: usize) -> usize {
    (ratio_percent / 100.0 * spans as f64 + 0.5).floor() as usize
}

/// Corrupts exactly `round(k% · E)` entity spans.
///
/// Spans are enumerated in corpus order, shuffled once with `spec.seed`, and
/// the prefix of the shuffled order is perturbed, so a smaller k perturbs a
/// subset of a larger k's spans (with identical corruptions). Gold labels are
/// taken from the input labels unless already present.
pub fn inject_noise(dataset: &Dataset, spec: &NoiseSpec) -> Result<Dataset> {
    if !(0.0..=100.0).contains(&spec.ratio_percent) {
        return Err(Error::config(format!(
            "noise ratio {} outside [0, 100]",
            spec.ratio_percent
        )));
    }
    let tagset = &dataset.tagset;
    if spec.mode != NoiseMode::DropToO && tagset.num_types() < 2 && spec.ratio_percent > 0.0 {
        return Err(Error::config(
            "type replacement needs at least two entity types",
        ));
    }

    let mut spans = Vec::new();
    for (si, s) in dataset.sentences.iter().enumerate() {
        spans.extend(
            decode_bio_to_spans(&s.labels, tagset)
                .into_iter()
                .map(|sp| (si, sp)),
        );
    }
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.shuffle(&mut seeded(mix(spec.seed, &[stream::NOISE])));
    let count = perturbation_count(spec.ratio_percent, spans.len());

    let mut out = dataset.clone();
    for s in &mut out.sentences {
        if s.gold_labels.is_none() {
            s.gold_labels = Some(s.labels.clone());
        }
    }
    for (rank, &idx) in order.iter().take(count).enumerate() {
        let (si, span) = spans[idx];
        let drop = match spec.mode {
            NoiseMode::DropToO => true,
            NoiseMode::ReplaceType => false,
            NoiseMode::Mixed => rank % 2 == 1,
        };
        let labels = &mut out.sentences[si].labels;
        if drop {
            labels[span.start..=span.end].fill(OUTSIDE);
        } else {
            let mut rng = seeded(mix(spec.seed, &[stream::NOISE, idx as u64]));
            let mut etype = rng.gen_range(0..tagset.num_types() - 1);
            if etype >= span.etype {
                etype += 1;
            }
            labels[span.start] = tagset.begin(etype);
            labels[span.start + 1..=span.end].fill(tagset.inside(etype));
        }
    }
    Ok(out)
}
