use serde::{Deserialize, Serialize};

use crate::collaboration::{score_small_loss, select_and_transfer, BatchView, TransferReport};
use crate::corpus::{Dataset, Vocabulary};
use crate::evaluation::selected_label_f1;
use crate::selection::{
    build_mask, estimate_uncertainty, predict_pseudo_labels, MaskMatrix, PseudoLabels,
    SelectionReport,
};
use crate::tagger::{
    adam_step, ema_update, loss_and_grad, AdamState, TaggerParams, TrainExample, WarmupSchedule,
};
use crate::{Error, Result};

use super::config::ExperimentConfig;
use super::seeds::{batches, SeedPlan};

/// Teacher `W_t`, student `W_s` and the student's optimizer for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherStudentPair {
    pub net: usize,
    pub teacher: TaggerParams,
    pub student: TaggerParams,
    pub adam: AdamState,
}

impl TeacherStudentPair {
    pub fn new(net: usize, params: TaggerParams, lr: f64) -> Self {
        let adam = AdamState::new(&params, lr);
        Self {
            net,
            teacher: params.clone(),
            student: params,
            adam,
        }
    }
}

/// Per-network copies of the corpus labels, initialised from the noisy labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelStore {
    pub labels: [Vec<Vec<usize>>; 2],
}

impl LabelStore {
    pub fn new(noisy: &[Vec<usize>]) -> Self {
        Self {
            labels: [noisy.to_vec(), noisy.to_vec()],
        }
    }

    /// Copies the unmasked positions of `pseudo` into network `net`'s labels
    /// for `sentence`; returns how many labels changed.
    pub fn update(
        &mut self,
        net: usize,
        sentence: usize,
        pseudo: &[usize],
        mask: &MaskMatrix,
    ) -> Result<usize> {
        let stored = &mut self.labels[net][sentence];
        if stored.len() != pseudo.len() || mask.mask.len() != pseudo.len() {
            return Err(Error::Shape(format!(
                "sentence {sentence}: refresh lengths differ"
            )));
        }
        let mut changed = 0;
        for ((s, &p), &m) in stored.iter_mut().zip(pseudo).zip(&mask.mask) {
            if m && *s != p {
                *s = p;
                changed += 1;
            }
        }
        Ok(changed)
    }
}

/// A training corpus mapped to token ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedCorpus {
    pub ids: Vec<Vec<usize>>,
    pub labels: Vec<Vec<usize>>,
    pub gold: Option<Vec<Vec<usize>>>,
}

impl EncodedCorpus {
    pub fn new(data: &Dataset, vocab: &Vocabulary) -> Self {
        Self {
            ids: data
                .sentences
                .iter()
                .map(|s| vocab.encode(&s.tokens))
                .collect(),
            labels: data.labels(),
            gold: data.gold_labels(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Student loss per network; `None` when every token was masked.
    pub loss: [Option<f64>; 2],
    pub unmasked: [usize; 2],
    pub tokens: usize,
    /// Sentences each network received from the other.
    pub received: [usize; 2],
}

/// Statistics gathered over one self-training epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub steps: usize,
    pub train_loss: [f64; 2],
    pub skipped_steps: [usize; 2],
    pub selection: [SelectionReport; 2],
    /// Indexed by donor network.
    pub transfer: [TransferReport; 2],
    pub refreshes: usize,
}

pub struct Trainer {
    cfg: ExperimentConfig,
    seeds: SeedPlan,
    schedule: WarmupSchedule,
    corpus: EncodedCorpus,
    pub pairs: [TeacherStudentPair; 2],
    pub store: LabelStore,
    step: u64,
    refreshes: u64,
    stats: EpochStats,
    loss_steps: [usize; 2],
}

impl Trainer {
    pub fn new(
        cfg: &ExperimentConfig,
        corpus: EncodedCorpus,
        vocab_size: usize,
        num_labels: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        let pair = |net| -> Result<TeacherStudentPair> {
            let params = TaggerParams::init(cfg.arch(net, num_labels), vocab_size)?;
            Ok(TeacherStudentPair::new(net, params, cfg.lr))
        };
        Ok(Self {
            seeds: cfg.seeds(),
            schedule: WarmupSchedule {
                base_lr: cfg.lr,
                warmup_steps: cfg.warmup_steps,
            },
            store: LabelStore::new(&corpus.labels),
            pairs: [pair(0)?, pair(1)?],
            cfg: cfg.clone(),
            corpus,
            step: 0,
            refreshes: 0,
            stats: EpochStats::default(),
            loss_steps: [0; 2],
        })
    }

    pub fn corpus(&self) -> &EncodedCorpus {
        &self.corpus
    }

    /// Self-training steps taken so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Fits each student to the noisy labels with unmasked cross-entropy,
    /// then duplicates it into the teacher and resets the optimizer. Returns
    /// the mean batch loss of the last epoch per network.
    pub fn pretrain(&mut self) -> Result<[f64; 2]> {
        if self.corpus.is_empty() {
            return Err(Error::config("cannot pre-train on an empty corpus"));
        }
        let mut last = [0.0; 2];
        for (net, pair) in self.pairs.iter_mut().enumerate() {
            let mut step = 0u64;
            for epoch in 0..self.cfg.pretrain_epochs {
                let order = self.seeds.pretrain_order(net, epoch, self.corpus.len());
                let (mut sum, mut count) = (0.0, 0);
                for batch in batches(&order, self.cfg.batch_size) {
                    let weights: Vec<Vec<f64>> = batch
                        .iter()
                        .map(|&s| vec![1.0; self.corpus.ids[s].len()])
                        .collect();
                    let examples: Vec<TrainExample> = batch
                        .iter()
                        .zip(&weights)
                        .enumerate()
                        .map(|(pos, (&s, w))| TrainExample {
                            ids: &self.corpus.ids[s],
                            targets: &self.corpus.labels[s],
                            weights: w,
                            dropout_seed: Some(self.seeds.pretrain_dropout(net, step, pos)),
                        })
                        .collect();
                    let lg = loss_and_grad(&pair.student, &examples)?;
                    pair.adam.lr = self.schedule.lr_at(pair.adam.t + 1);
                    adam_step(&mut pair.student, &lg.grads, &mut pair.adam)?;
                    sum += lg.loss;
                    count += 1;
                    step += 1;
                }
                last[net] = sum / count as f64;
            }
            pair.teacher = pair.student.snapshot();
            pair.adam.reset();
        }
        Ok(last)
    }

    /// One synchronized update of both networks on the sentences `batch`.
    pub fn self_train_step(&mut self, batch: &[usize]) -> Result<StepReport> {
        let cfg = &self.cfg;
        let ids: Vec<&[usize]> = batch
            .iter()
            .map(|&s| self.corpus.ids[s].as_slice())
            .collect();

        let mut views = Vec::with_capacity(2);
        let mut uncertainty = Vec::with_capacity(2);
        for (net, pair) in self.pairs.iter().enumerate() {
            let base = self.seeds.mc(net, self.step);
            let pseudo = ids
                .iter()
                .map(|s| predict_pseudo_labels(&pair.teacher, s))
                .collect::<Result<Vec<_>>>()?;
            let unc = ids
                .iter()
                .zip(&pseudo)
                .zip(batch)
                .map(|((s, p), &si)| {
                    estimate_uncertainty(&pair.teacher, s, p, cfg.mc_passes, base, si)
                })
                .collect::<Result<Vec<_>>>()?;
            let scores = score_small_loss(&pair.student, &ids, &pseudo)?;
            views.push(BatchView {
                sentences: batch.to_vec(),
                pseudo,
                scores,
            });
            uncertainty.push(unc);
        }
        let plan = select_and_transfer(&views[0], &views[1], cfg.delta)?;

        let mut report = StepReport {
            loss: [None; 2],
            unmasked: [0; 2],
            tokens: ids.iter().map(|s| s.len()).sum(),
            received: [plan.received[0].len(), plan.received[1].len()],
        };
        for net in 0..2 {
            let other = 1 - net;
            let mut pseudo = views[net].pseudo.clone();
            plan.apply(net, &views[other], &mut pseudo);
            let masks: Vec<MaskMatrix> = pseudo
                .iter()
                .zip(&uncertainty[net])
                .map(|(p, u)| build_mask(p, u, cfg.thresholds()))
                .collect();

            for ((p, u), m) in pseudo.iter().zip(&uncertainty[net]).zip(&masks) {
                self.stats.selection[net].record(p, u, m);
            }
            self.stats.transfer[other].record(&views[other].scores, &plan.received[net]);
            if let Some(gold) = &self.corpus.gold {
                record_quality(&mut self.stats.selection[net], &pseudo, &masks, batch, gold)?;
            }

            let weights: Vec<Vec<f64>> = masks.iter().map(MaskMatrix::weights).collect();
            let examples: Vec<TrainExample> = (0..batch.len())
                .map(|pos| TrainExample {
                    ids: ids[pos],
                    targets: &pseudo[pos].labels,
                    weights: &weights[pos],
                    dropout_seed: Some(self.seeds.train_dropout(net, self.step, pos)),
                })
                .collect();
            let pair = &mut self.pairs[net];
            let lg = loss_and_grad(&pair.student, &examples)?;
            report.unmasked[net] = masks.iter().map(MaskMatrix::unmasked).sum();
            if lg.empty {
                self.stats.skipped_steps[net] += 1;
            } else {
                pair.adam.lr = self.schedule.lr_at(pair.adam.t + 1);
                adam_step(&mut pair.student, &lg.grads, &mut pair.adam)?;
                report.loss[net] = Some(lg.loss);
                let n = self.loss_steps[net] as f64;
                self.stats.train_loss[net] = (self.stats.train_loss[net] * n + lg.loss) / (n + 1.0);
                self.loss_steps[net] += 1;
            }
            ema_update(&mut pair.teacher, &pair.student, cfg.ema_alpha)?;
        }
        self.step += 1;
        self.stats.steps += 1;
        if cfg.update_cycle > 0 && self.step.is_multiple_of(cfg.update_cycle) {
            self.refresh_labels()?;
        }
        Ok(report)
    }

    /// Overwrites each network's stored labels with its teacher's pseudo
    /// labels wherever they pass that network's mask. Returns the number of
    /// labels changed.
    pub fn refresh_labels(&mut self) -> Result<usize> {
        let mut changed = 0;
        for net in 0..2 {
            let base = self.seeds.refresh_mc(net, self.refreshes);
            let teacher = &self.pairs[net].teacher;
            for (si, ids) in self.corpus.ids.iter().enumerate() {
                let pseudo = predict_pseudo_labels(teacher, ids)?;
                let unc =
                    estimate_uncertainty(teacher, ids, &pseudo, self.cfg.mc_passes, base, si)?;
                let mask = build_mask(&pseudo, &unc, self.cfg.thresholds());
                changed += self.store.update(net, si, &pseudo.labels, &mask)?;
            }
        }
        self.refreshes += 1;
        self.stats.refreshes += 1;
        Ok(changed)
    }

    /// Batches of self-training epoch `epoch`.
    pub fn epoch_batches(&self, epoch: usize) -> Vec<Vec<usize>> {
        batches(
            &self.seeds.epoch_order(epoch, self.corpus.len()),
            self.cfg.batch_size,
        )
    }

    pub fn run_epoch(&mut self, epoch: usize) -> Result<EpochStats> {
        for batch in self.epoch_batches(epoch) {
            self.self_train_step(&batch)?;
        }
        self.loss_steps = [0; 2];
        Ok(std::mem::take(&mut self.stats))
    }
}

fn record_quality(
    report: &mut SelectionReport,
    pseudo: &[PseudoLabels],
    masks: &[MaskMatrix],
    batch: &[usize],
    gold: &[Vec<usize>],
) -> Result<()> {
    let labels: Vec<Vec<usize>> = pseudo.iter().map(|p| p.labels.clone()).collect();
    let kept: Vec<Vec<bool>> = masks.iter().map(|m| m.mask.clone()).collect();
    let dropped: Vec<Vec<bool>> = kept
        .iter()
        .map(|m| m.iter().map(|&k| !k).collect())
        .collect();
    let gold: Vec<Vec<usize>> = batch.iter().map(|&s| gold[s].clone()).collect();
    let selected = selected_label_f1(&labels, &kept, Some(&gold))?;
    let unselected = selected_label_f1(&labels, &dropped, Some(&gold))?;
    report.record_quality(selected, unselected);
    Ok(())
}
