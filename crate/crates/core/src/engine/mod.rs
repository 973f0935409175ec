//! The full training procedure: pre-training on the noisy labels, then dual
//! teacher-student self-training with uncertainty-aware selection and
//! student-student transfer, with best-on-dev model selection.

mod config;
mod seeds;
mod trainer;

pub use config::ExperimentConfig;
pub use seeds::{batches, SeedPlan};
pub use trainer::{EncodedCorpus, EpochStats, LabelStore, StepReport, TeacherStudentPair, Trainer};

use serde::{Deserialize, Serialize};

use crate::collaboration::TransferReport;
use crate::corpus::{build_vocabulary, Dataset, TagSet, Vocabulary};
use crate::distant_supervision::{noise_profile, GeneratorSettings, NoiseProfile};
use crate::evaluation::{predict_all, span_prf, SpanMetrics};
use crate::selection::SelectionReport;
use crate::tagger::TaggerParams;
use crate::{Error, Result};

/// Noisy training corpus (optionally carrying gold labels) and clean dev/test sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentData {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    Teacher1,
    Teacher2,
    Student1,
    Student2,
}

impl ModelId {
    /// Dev-F1 ties resolve to the earlier entry.
    pub const TIE_ORDER: [ModelId; 4] = [
        ModelId::Teacher1,
        ModelId::Teacher2,
        ModelId::Student1,
        ModelId::Student2,
    ];

    pub fn network(self) -> usize {
        match self {
            ModelId::Teacher1 | ModelId::Student1 => 0,
            ModelId::Teacher2 | ModelId::Student2 => 1,
        }
    }

    pub fn is_teacher(self) -> bool {
        matches!(self, ModelId::Teacher1 | ModelId::Teacher2)
    }

    fn params(self, pairs: &[TeacherStudentPair; 2]) -> &TaggerParams {
        let pair = &pairs[self.network()];
        if self.is_teacher() {
            &pair.teacher
        } else {
            &pair.student
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub train_sentences: usize,
    pub train_tokens: usize,
    pub dev_sentences: usize,
    pub test_sentences: usize,
    pub vocab_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainRecord {
    pub loss: [f64; 2],
    pub dev: [SpanMetrics; 2],
    /// Teacher predictions on the training corpus scored against its gold labels.
    pub train_teacher: Option<[SpanMetrics; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEpoch {
    pub train_loss: f64,
    pub skipped_steps: usize,
    pub masked_fraction: f64,
    pub selection: SelectionReport,
    /// This network as donor.
    pub transfer: TransferReport,
    pub dev_teacher: SpanMetrics,
    pub dev_student: SpanMetrics,
    pub train_teacher: Option<SpanMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: usize,
    pub refreshes: usize,
    pub networks: [NetworkEpoch; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestModel {
    /// 0 denotes the pre-trained models.
    pub epoch: usize,
    pub model: ModelId,
    pub dev: SpanMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub generator: Option<GeneratorSettings>,
    pub data: DataSummary,
    pub noise: Option<NoiseProfile>,
    pub pretrain: PretrainRecord,
    pub epochs: Vec<EpochRecord>,
    pub best: BestModel,
    pub test: SpanMetrics,
}

impl RunResult {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

pub struct RunOutput {
    pub result: RunResult,
    pub best_params: TaggerParams,
    pub vocab: Vocabulary,
}

struct Evaluator<'a> {
    tagset: &'a TagSet,
    ids: Vec<Vec<usize>>,
    gold: Vec<Vec<usize>>,
}

impl<'a> Evaluator<'a> {
    fn new(data: &'a Dataset, gold: Vec<Vec<usize>>, vocab: &Vocabulary) -> Self {
        Self {
            tagset: &data.tagset,
            ids: data
                .sentences
                .iter()
                .map(|s| vocab.encode(&s.tokens))
                .collect(),
            gold,
        }
    }

    fn score(&self, model: &TaggerParams) -> Result<SpanMetrics> {
        span_prf(&predict_all(model, &self.ids)?, &self.gold, self.tagset)
    }
}

/// Pre-training, `cfg.epochs` self-training epochs, and test evaluation of
/// the model with the best dev F1.
pub fn run_experiment(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<RunOutput> {
    cfg.validate()?;
    let tagset = cfg.tagset()?;
    for d in [&data.train, &data.dev, &data.test] {
        if d.tagset != tagset {
            return Err(Error::config(format!(
                "dataset `{}` uses entity types {:?}, config has {:?}",
                d.name,
                d.tagset.entity_types(),
                cfg.entity_types
            )));
        }
        if d.is_empty() {
            return Err(Error::config(format!("dataset `{}` is empty", d.name)));
        }
    }
    let vocab = build_vocabulary(&data.train, cfg.min_count, cfg.case_folding);
    let corpus = EncodedCorpus::new(&data.train, &vocab);
    let dev = Evaluator::new(&data.dev, data.dev.labels(), &vocab);
    let test = Evaluator::new(&data.test, data.test.labels(), &vocab);
    let train_eval = data
        .train
        .gold_labels()
        .map(|g| Evaluator::new(&data.train, g, &vocab));

    let mut trainer = Trainer::new(cfg, corpus, vocab.len(), tagset.num_labels())?;
    let loss = trainer.pretrain()?;
    let teacher_scores = |t: &Trainer, ev: &Evaluator| -> Result<[SpanMetrics; 2]> {
        Ok([
            ev.score(&t.pairs[0].teacher)?,
            ev.score(&t.pairs[1].teacher)?,
        ])
    };
    let pretrain = PretrainRecord {
        loss,
        dev: teacher_scores(&trainer, &dev)?,
        train_teacher: train_eval
            .as_ref()
            .map(|ev| teacher_scores(&trainer, ev))
            .transpose()?,
    };

    let mut best: Option<(BestModel, TaggerParams)> = None;
    let mut consider = |epoch: usize, model: ModelId, dev: SpanMetrics, params: &TaggerParams| {
        if best.as_ref().is_none_or(|(b, _)| dev.f1 > b.dev.f1) {
            best = Some((BestModel { epoch, model, dev }, params.clone()));
        }
    };
    if cfg.epochs == 0 {
        for (model, d) in [ModelId::Teacher1, ModelId::Teacher2]
            .into_iter()
            .zip(pretrain.dev)
        {
            consider(0, model, d, model.params(&trainer.pairs));
        }
    }

    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let stats = trainer.run_epoch(epoch)?;
        let mut dev_scores = [SpanMetrics::default(); 4];
        for (slot, model) in ModelId::TIE_ORDER.into_iter().enumerate() {
            let params = model.params(&trainer.pairs);
            dev_scores[slot] = dev.score(params)?;
            consider(epoch, model, dev_scores[slot], params);
        }
        let train_teacher = train_eval
            .as_ref()
            .map(|ev| teacher_scores(&trainer, ev))
            .transpose()?;
        let EpochStats {
            steps,
            train_loss,
            skipped_steps,
            selection,
            transfer,
            refreshes,
        } = stats;
        let [sel0, sel1] = selection;
        let [tr0, tr1] = transfer;
        let network =
            |net: usize, selection: SelectionReport, transfer: TransferReport| NetworkEpoch {
                train_loss: train_loss[net],
                skipped_steps: skipped_steps[net],
                masked_fraction: selection.masked_fraction(),
                selection,
                transfer,
                dev_teacher: dev_scores[net],
                dev_student: dev_scores[2 + net],
                train_teacher: train_teacher.map(|t| t[net]),
            };
        epochs.push(EpochRecord {
            epoch,
            steps,
            refreshes,
            networks: [network(0, sel0, tr0), network(1, sel1, tr1)],
        });
    }

    let (best, best_params) = best.expect("at least one candidate model");
    let result = RunResult {
        config: cfg.clone(),
        generator: None,
        data: DataSummary {
            train_sentences: data.train.len(),
            train_tokens: data.train.num_tokens(),
            dev_sentences: data.dev.len(),
            test_sentences: data.test.len(),
            vocab_size: vocab.len(),
        },
        noise: data
            .train
            .gold_labels()
            .map(|_| noise_profile(&data.train))
            .transpose()?,
        test: test.score(&best_params)?,
        pretrain,
        epochs,
        best,
    };
    Ok(RunOutput {
        result,
        best_params,
        vocab,
    })
}
