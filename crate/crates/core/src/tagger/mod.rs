//! Window-based neural token classifier.
//!
//! For token `i` the input is the concatenation of the embeddings of tokens
//! `i-w ..= i+w` (PAD outside the sentence). One `tanh` hidden layer with
//! inverted dropout feeds a per-token softmax over the label alphabet:
//!
//! ```text
//! x_i = [E[id_{i-w}], .., E[id_{i+w}]]
//! h_i = tanh(x_i W1 + b1) * mask_i / keep
//! p_i = softmax(h_i W2 + b2)
//! ```
//!
//! Dropout masks are drawn from ChaCha streams selected by [`ForwardMode`],
//! so every forward pass is a pure function of its inputs.

mod checkpoint;
mod grad;
mod optim;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::Checkpoint;
pub use grad::{loss_and_grad, LossGrad, TrainExample};
pub use optim::{adam_step, ema_update, AdamState, WarmupSchedule};

use crate::corpus::PAD;
use crate::rng::{mix, seeded};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggerArch {
    pub embedding_dim: usize,
    pub window_radius: usize,
    pub hidden_dim: usize,
    pub num_labels: usize,
    pub dropout_rate: f64,
    pub init_seed: u64,
}

impl TaggerArch {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.hidden_dim == 0 || self.num_labels == 0 {
            return Err(Error::config("tagger dimensions must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn window(&self) -> usize {
        2 * self.window_radius + 1
    }

    pub fn input_dim(&self) -> usize {
        self.window() * self.embedding_dim
    }

    pub fn keep_prob(&self) -> f64 {
        1.0 - self.dropout_rate
    }

    /// Same shapes, different parameter identity: used to compare architectures.
    fn same_shape(&self, other: &TaggerArch) -> bool {
        self.embedding_dim == other.embedding_dim
            && self.window_radius == other.window_radius
            && self.hidden_dim == other.hidden_dim
            && self.num_labels == other.num_labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    /// Fresh dropout mask drawn from `seed`.
    Train { seed: u64 },
    /// No dropout.
    Eval,
    /// Monte Carlo pass `pass` for corpus sentence `sentence`; the mask stream
    /// is `mix(base_seed, pass, sentence)`.
    Mc {
        base_seed: u64,
        pass: usize,
        sentence: usize,
    },
}

impl ForwardMode {
    fn mask_rng(self) -> Option<ChaCha8Rng> {
        match self {
            ForwardMode::Train { seed } => Some(seeded(seed)),
            ForwardMode::Eval => None,
            ForwardMode::Mc {
                base_seed,
                pass,
                sentence,
            } => Some(mc_rng(base_seed, pass, sentence)),
        }
    }
}

pub(crate) fn mc_rng(base_seed: u64, pass: usize, sentence: usize) -> ChaCha8Rng {
    seeded(mix(base_seed, &[pass as u64, sentence as u64]))
}

pub const BLOCK_NAMES: [&str; 5] = ["embedding", "hidden_w", "hidden_b", "output_w", "output_b"];

/// All learnable weights of one tagger. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerParams {
    pub arch: TaggerArch,
    /// vocab × embedding_dim
    pub embedding: Array2<f64>,
    /// input_dim × hidden_dim
    pub hidden_w: Array2<f64>,
    pub hidden_b: Array1<f64>,
    /// hidden_dim × num_labels
    pub output_w: Array2<f64>,
    pub output_b: Array1<f64>,
}

impl TaggerParams {
    pub fn zeros(arch: TaggerArch, vocab_size: usize) -> Result<Self> {
        arch.validate()?;
        if vocab_size == 0 {
            return Err(Error::config("vocabulary must not be empty"));
        }
        Ok(Self {
            arch,
            embedding: Array2::zeros((vocab_size, arch.embedding_dim)),
            hidden_w: Array2::zeros((arch.input_dim(), arch.hidden_dim)),
            hidden_b: Array1::zeros(arch.hidden_dim),
            output_w: Array2::zeros((arch.hidden_dim, arch.num_labels)),
            output_b: Array1::zeros(arch.num_labels),
        })
    }

    /// Glorot-uniform matrices, zero biases, drawn from `arch.init_seed`.
    pub fn init(arch: TaggerArch, vocab_size: usize) -> Result<Self> {
        let mut p = Self::zeros(arch, vocab_size)?;
        let mut rng = seeded(arch.init_seed);
        for m in [&mut p.embedding, &mut p.hidden_w, &mut p.output_w] {
            let (fan_in, fan_out) = m.dim();
            let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
            m.mapv_inplace(|_| rng.gen_range(-r..r));
        }
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            arch: self.arch,
            embedding: Array2::zeros(self.embedding.raw_dim()),
            hidden_w: Array2::zeros(self.hidden_w.raw_dim()),
            hidden_b: Array1::zeros(self.hidden_b.raw_dim()),
            output_w: Array2::zeros(self.output_w.raw_dim()),
            output_b: Array1::zeros(self.output_b.raw_dim()),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.nrows()
    }

    /// Deep copy; `W_t <- W` duplication.
    pub fn snapshot(&self) -> Self {
        self.clone()
    }

    pub fn restore(&mut self, from: &TaggerParams) {
        self.clone_from(from);
    }

    pub fn blocks(&self) -> [(&'static str, &[f64]); 5] {
        [
            (
                BLOCK_NAMES[0],
                self.embedding.as_slice().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[1],
                self.hidden_w.as_slice().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[2],
                self.hidden_b.as_slice().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[3],
                self.output_w.as_slice().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[4],
                self.output_b.as_slice().expect("standard layout"),
            ),
        ]
    }

    pub fn blocks_mut(&mut self) -> [(&'static str, &mut [f64]); 5] {
        [
            (
                BLOCK_NAMES[0],
                self.embedding.as_slice_mut().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[1],
                self.hidden_w.as_slice_mut().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[2],
                self.hidden_b.as_slice_mut().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[3],
                self.output_w.as_slice_mut().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[4],
                self.output_b.as_slice_mut().expect("standard layout"),
            ),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks()
            .iter()
            .all(|(_, b)| b.iter().all(|v| v.is_finite()))
    }

    pub fn check_same_shape(&self, other: &TaggerParams) -> Result<()> {
        if !self.arch.same_shape(&other.arch) || self.vocab_size() != other.vocab_size() {
            return Err(Error::Shape(format!(
                "parameter shapes differ ({:?}/{} vs {:?}/{})",
                self.arch,
                self.vocab_size(),
                other.arch,
                other.vocab_size()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_ids(&self, ids: &[usize]) -> Result<()> {
        let vocab = self.vocab_size();
        match ids.iter().find(|&&id| id >= vocab) {
            Some(&id) => Err(Error::TokenOutOfRange { id, vocab }),
            None => Ok(()),
        }
    }

    /// Per-token probability distributions, one row per token.
    pub fn forward(&self, ids: &[usize], mode: ForwardMode) -> Result<Array2<f64>> {
        self.check_ids(ids)?;
        let hidden = self.hidden(&self.windows(ids));
        let hidden = match mode.mask_rng() {
            Some(mut rng) => match self.dropout_mask(&mut rng, ids.len()) {
                Some(mask) => hidden * mask,
                None => hidden,
            },
            None => hidden,
        };
        let mut logits = self.logits(&hidden);
        softmax_rows(&mut logits);
        Ok(logits)
    }

    /// Eval-mode log-probabilities.
    pub fn log_probs(&self, ids: &[usize]) -> Result<Array2<f64>> {
        self.check_ids(ids)?;
        let mut logits = self.logits(&self.hidden(&self.windows(ids)));
        log_softmax_rows(&mut logits);
        Ok(logits)
    }

    /// Probability of `labels[i]` at token `i` under `passes` Monte Carlo
    /// dropout passes; result is `passes × len`. Equivalent to running
    /// [`forward`](Self::forward) with `ForwardMode::Mc` once per pass, but the
    /// pre-dropout hidden layer is computed only once.
    pub fn mc_label_probs(
        &self,
        ids: &[usize],
        labels: &[usize],
        passes: usize,
        base_seed: u64,
        sentence: usize,
    ) -> Result<Array2<f64>> {
        self.check_ids(ids)?;
        if labels.len() != ids.len() || labels.iter().any(|&l| l >= self.arch.num_labels) {
            return Err(Error::Shape(
                "label sequence does not match the sentence".into(),
            ));
        }
        let hidden = self.hidden(&self.windows(ids));
        let mut out = Array2::zeros((passes, ids.len()));
        for k in 0..passes {
            let mut rng = mc_rng(base_seed, k, sentence);
            let mut logits = match self.dropout_mask(&mut rng, ids.len()) {
                Some(mask) => self.logits(&(&hidden * &mask)),
                None => self.logits(&hidden),
            };
            softmax_rows(&mut logits);
            for (i, &l) in labels.iter().enumerate() {
                out[[k, i]] = logits[[i, l]];
            }
        }
        Ok(out)
    }

    /// Eval-mode argmax labels, ties to the lowest index.
    pub fn predict(&self, ids: &[usize]) -> Result<Vec<usize>> {
        let probs = self.forward(ids, ForwardMode::Eval)?;
        Ok(probs.rows().into_iter().map(|r| argmax(r).0).collect())
    }

    pub(crate) fn windows(&self, ids: &[usize]) -> Array2<f64> {
        let d = self.arch.embedding_dim;
        let w = self.arch.window_radius as isize;
        let mut x = Array2::zeros((ids.len(), self.arch.input_dim()));
        for (i, mut row) in x.rows_mut().into_iter().enumerate() {
            for (slot, off) in (-w..=w).enumerate() {
                let id = window_id(ids, i as isize + off);
                row.slice_mut(ndarray::s![slot * d..(slot + 1) * d])
                    .assign(&self.embedding.row(id));
            }
        }
        x
    }

    pub(crate) fn hidden(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut h = x.dot(&self.hidden_w) + &self.hidden_b;
        h.mapv_inplace(f64::tanh);
        h
    }

    pub(crate) fn logits(&self, h: &Array2<f64>) -> Array2<f64> {
        h.dot(&self.output_w) + &self.output_b
    }

    /// Inverted-dropout mask (entries 0 or 1/keep), row-major draw order.
    /// `None` when the dropout rate is zero.
    pub(crate) fn dropout_mask(&self, rng: &mut ChaCha8Rng, rows: usize) -> Option<Array2<f64>> {
        if self.arch.dropout_rate == 0.0 {
            return None;
        }
        let keep = self.arch.keep_prob();
        let scale = 1.0 / keep;
        Some(Array2::from_shape_fn((rows, self.arch.hidden_dim), |_| {
            if rng.gen::<f64>() < keep {
                scale
            } else {
                0.0
            }
        }))
    }
}

pub(crate) fn window_id(ids: &[usize], pos: isize) -> usize {
    if pos < 0 || pos as usize >= ids.len() {
        PAD
    } else {
        ids[pos as usize]
    }
}

/// Index and value of the row maximum; ties resolve to the lowest index.
pub fn argmax(row: ArrayView1<f64>) -> (usize, f64) {
    let mut best = (0, row[0]);
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

pub(crate) fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

pub(crate) fn log_softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
}
