//! Independent reference implementations shared by the integration tests and
//! the acceptance binary. None of them call the library routine they check.
#![allow(dead_code)]

pub mod suites;

use dsner::corpus::{Dataset, Span, TagSet, OUTSIDE};
use dsner::distant_supervision::{generate_synthetic, GeneratorSettings};
use dsner::engine::{ExperimentConfig, ExperimentData, TeacherStudentPair, Trainer};
use dsner::rng::seeded;
use dsner::tagger::{
    adam_step, ema_update, loss_and_grad, ForwardMode, TaggerArch, TaggerParams, TrainExample,
    WarmupSchedule,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Welford's single-pass population variance.
pub fn variance(values: &[f64]) -> f64 {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for &x in values {
        n += 1.0;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    m2 / n
}

pub fn keep_token(
    confidence: f64,
    uncertainty: f64,
    transferred: bool,
    sigma_co: f64,
    sigma_ua: f64,
) -> bool {
    if transferred {
        return true;
    }
    let certain = uncertainty < sigma_ua;
    let confident = confidence > sigma_co;
    certain && confident
}

/// Teacher weight after `n` updates towards a fixed student.
pub fn ema_closed_form(t0: f64, s: f64, alpha: f64, n: i32) -> f64 {
    s + alpha.powi(n) * (t0 - s)
}

/// Positions of the `tenths * len / 10` smallest scores, stable on ties.
pub fn small_loss_oracle(scores: &[f64], tenths: usize) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize)> = scores.iter().copied().zip(0..).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs
        .into_iter()
        .take(tenths * scores.len() / 10)
        .map(|(_, i)| i)
        .collect()
}

/// A random BIO-legal label sequence over `tagset`.
pub fn random_legal_bio(rng: &mut ChaCha8Rng, tagset: &TagSet, len: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(len);
    let mut current: Option<usize> = None;
    while out.len() < len {
        match (rng.gen_range(0..3), current) {
            (0, _) => {
                out.push(OUTSIDE);
                current = None;
            }
            (1, Some(t)) => out.push(tagset.inside(t)),
            _ => {
                let t = rng.gen_range(0..tagset.num_types());
                out.push(tagset.begin(t));
                current = Some(t);
            }
        }
    }
    out
}

/// Spans of a legal sequence, read off by a hand-rolled scan.
pub fn spans_of_legal(labels: &[usize], tagset: &TagSet) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let l = labels[i];
        if let Some(t) = (0..tagset.num_types()).find(|&t| tagset.begin(t) == l) {
            let mut j = i + 1;
            while j < labels.len() && labels[j] == tagset.inside(t) {
                j += 1;
            }
            spans.push(Span::new(i, j - 1, t));
            i = j;
        } else {
            i += 1;
        }
    }
    spans
}

/// A random tagger with every dimension at most 8 and a random batch for it.
pub struct GradCase {
    pub params: TaggerParams,
    pub ids: Vec<Vec<usize>>,
    pub targets: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
    pub seeds: Vec<Option<u64>>,
}

impl GradCase {
    pub fn random(seed: u64) -> Self {
        let mut rng = seeded(seed);
        let arch = TaggerArch {
            embedding_dim: rng.gen_range(1..=8),
            window_radius: rng.gen_range(0..=2),
            hidden_dim: rng.gen_range(1..=8),
            num_labels: rng.gen_range(2..=8),
            dropout_rate: if rng.gen_bool(0.5) {
                0.0
            } else {
                rng.gen_range(0.1..0.6)
            },
            init_seed: rng.gen(),
        };
        let vocab = rng.gen_range(2..=8);
        let mut params = TaggerParams::init(arch, vocab).unwrap();
        for (_, block) in params.blocks_mut() {
            for v in block.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        let n = rng.gen_range(1..=3);
        let mut case = Self {
            params,
            ids: vec![],
            targets: vec![],
            weights: vec![],
            seeds: vec![],
        };
        for _ in 0..n {
            let len = rng.gen_range(1..=6);
            case.ids
                .push((0..len).map(|_| rng.gen_range(0..vocab)).collect());
            case.targets.push(
                (0..len)
                    .map(|_| rng.gen_range(0..arch.num_labels))
                    .collect(),
            );
            case.weights.push(
                (0..len)
                    .map(|_| if rng.gen_bool(0.7) { 1.0 } else { 0.0 })
                    .collect(),
            );
            case.seeds.push(rng.gen_bool(0.8).then(|| rng.gen()));
        }
        case.weights[0][0] = 1.0;
        case
    }

    pub fn examples(&self) -> Vec<TrainExample<'_>> {
        (0..self.ids.len())
            .map(|n| TrainExample {
                ids: &self.ids[n],
                targets: &self.targets[n],
                weights: &self.weights[n],
                dropout_seed: self.seeds[n],
            })
            .collect()
    }

    /// Masked cross-entropy recomputed from `forward` probabilities.
    pub fn loss(&self, params: &TaggerParams) -> f64 {
        let (mut total, mut wsum) = (0.0, 0.0);
        for n in 0..self.ids.len() {
            let mode = match self.seeds[n] {
                Some(seed) => ForwardMode::Train { seed },
                None => ForwardMode::Eval,
            };
            let p = params.forward(&self.ids[n], mode).unwrap();
            for (i, (&t, &w)) in self.targets[n].iter().zip(&self.weights[n]).enumerate() {
                total -= w * p[[i, t]].ln();
                wsum += w;
            }
        }
        total / f64::max(1.0, wsum)
    }

    /// Largest relative disagreement between analytic and central-difference
    /// gradients. Entries where both are below `floor` in magnitude compare
    /// against `floor` instead.
    pub fn max_relative_error(&self, h: f64, floor: f64) -> f64 {
        let analytic = loss_and_grad(&self.params, &self.examples()).unwrap().grads;
        let mut probe = self.params.clone();
        let mut worst: f64 = 0.0;
        for (b, (_, grad)) in analytic.blocks().into_iter().enumerate() {
            for (i, &a) in grad.iter().enumerate() {
                let orig = self.params.blocks()[b].1[i];
                probe.blocks_mut()[b].1[i] = orig + h;
                let up = self.loss(&probe);
                probe.blocks_mut()[b].1[i] = orig - h;
                let down = self.loss(&probe);
                probe.blocks_mut()[b].1[i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let scale = a.abs().max(numeric.abs()).max(floor);
                worst = worst.max((a - numeric).abs() / scale);
            }
        }
        worst
    }
}

/// A small synthetic corpus: noisy train with gold attached, dev and test.
pub fn small_corpus(train: usize, seed: u64) -> ExperimentData {
    let settings = GeneratorSettings {
        seed,
        train_sentences: train,
        dev_sentences: 30,
        test_sentences: 30,
        ..GeneratorSettings::default()
    };
    let tagset = TagSet::conll03();
    let corpus = generate_synthetic(&settings, &tagset).unwrap();
    ExperimentData {
        train: corpus.distant_train(&settings).unwrap(),
        dev: corpus.dev,
        test: corpus.test,
    }
}

/// Both networks trained the textbook way: every step each teacher labels
/// the batch by argmax, its student takes one Adam step on the unmasked
/// cross-entropy against those labels, and the teacher follows by EMA.
pub struct PlainDualSelfTraining {
    pub pairs: Vec<TeacherStudentPair>,
    cfg: ExperimentConfig,
    step: u64,
}

impl PlainDualSelfTraining {
    pub fn new(cfg: &ExperimentConfig, pairs: &[TeacherStudentPair; 2]) -> Self {
        Self {
            pairs: pairs.to_vec(),
            cfg: cfg.clone(),
            step: 0,
        }
    }

    pub fn step(&mut self, batch: &[usize], ids: &[Vec<usize>]) {
        let seeds = self.cfg.seeds();
        let schedule = WarmupSchedule {
            base_lr: self.cfg.lr,
            warmup_steps: self.cfg.warmup_steps,
        };
        for (net, pair) in self.pairs.iter_mut().enumerate() {
            let targets: Vec<Vec<usize>> = batch
                .iter()
                .map(|&s| argmax_labels(&pair.teacher, &ids[s]))
                .collect();
            let weights: Vec<Vec<f64>> = targets.iter().map(|t| vec![1.0; t.len()]).collect();
            let examples: Vec<TrainExample> = batch
                .iter()
                .enumerate()
                .map(|(pos, &s)| TrainExample {
                    ids: &ids[s],
                    targets: &targets[pos],
                    weights: &weights[pos],
                    dropout_seed: Some(seeds.train_dropout(net, self.step, pos)),
                })
                .collect();
            let grads = loss_and_grad(&pair.student, &examples).unwrap().grads;
            pair.adam.lr = schedule.lr_at(pair.adam.t + 1);
            adam_step(&mut pair.student, &grads, &mut pair.adam).unwrap();
            ema_update(&mut pair.teacher, &pair.student, self.cfg.ema_alpha).unwrap();
        }
        self.step += 1;
    }
}

fn argmax_labels(model: &TaggerParams, ids: &[usize]) -> Vec<usize> {
    let p = model.forward(ids, ForwardMode::Eval).unwrap();
    p.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Pre-trained trainer on `data` under `cfg`.
pub fn pretrained(cfg: &ExperimentConfig, data: &Dataset) -> Trainer {
    let vocab = dsner::corpus::build_vocabulary(data, cfg.min_count, cfg.case_folding);
    let corpus = dsner::engine::EncodedCorpus::new(data, &vocab);
    let mut t = Trainer::new(cfg, corpus, vocab.len(), data.tagset.num_labels()).unwrap();
    t.pretrain().unwrap();
    t
}

/// Median of an odd-length or even-length sample; even lengths average the middle pair.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
