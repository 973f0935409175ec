//! Masked cross-entropy and its exact gradient.

use ndarray::{concatenate, s, Array2, Axis};

use super::{log_softmax_rows, window_id, TaggerParams};
use crate::rng::seeded;
use crate::{Error, Result};

/// One sentence of a training batch.
#[derive(Debug, Clone, Copy)]
pub struct TrainExample<'a> {
    pub ids: &'a [usize],
    pub targets: &'a [usize],
    /// Per-token loss weights, 0 or 1.
    pub weights: &'a [f64],
    /// Train-mode dropout stream; `None` disables dropout.
    pub dropout_seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grads: TaggerParams,
    /// Number of contributing (unmasked) tokens.
    pub weight_sum: f64,
    /// Set when every token of the batch was masked out; loss and gradients are zero.
    pub empty: bool,
}

/// `loss = Σ w_i CE_i / max(1, Σ w_i)` over all tokens of the batch, with
/// gradients w.r.t. every parameter for the dropout masks fixed by the
/// examples' seeds.
pub fn loss_and_grad(params: &TaggerParams, batch: &[TrainExample<'_>]) -> Result<LossGrad> {
    let arch = params.arch;
    let mut weight_sum = 0.0;
    for (n, ex) in batch.iter().enumerate() {
        if ex.targets.len() != ex.ids.len() || ex.weights.len() != ex.ids.len() {
            return Err(Error::Shape(format!(
                "example {n}: ids, targets and weights differ in length"
            )));
        }
        params.check_ids(ex.ids)?;
        if let Some(&t) = ex.targets.iter().find(|&&t| t >= arch.num_labels) {
            return Err(Error::Shape(format!(
                "example {n}: target {t} outside label alphabet"
            )));
        }
        if ex.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Shape(format!(
                "example {n}: weights must be finite and non-negative"
            )));
        }
        weight_sum += ex.weights.iter().sum::<f64>();
    }
    let mut grads = params.zeros_like();
    if weight_sum == 0.0 {
        return Ok(LossGrad {
            loss: 0.0,
            grads,
            weight_sum,
            empty: true,
        });
    }
    let norm = weight_sum.max(1.0);

    let xs: Vec<Array2<f64>> = batch.iter().map(|ex| params.windows(ex.ids)).collect();
    let x = concatenate(Axis(0), &xs.iter().map(|m| m.view()).collect::<Vec<_>>())
        .expect("consistent window width");
    let h = params.hidden(&x);

    // Each example draws its own mask, exactly as `forward(Train { seed })` does.
    let mut mask = Array2::<f64>::ones(h.raw_dim());
    let mut row = 0;
    for ex in batch {
        let n = ex.ids.len();
        if let Some(seed) = ex.dropout_seed {
            if let Some(m) = params.dropout_mask(&mut seeded(seed), n) {
                mask.slice_mut(s![row..row + n, ..]).assign(&m);
            }
        }
        row += n;
    }
    let hd = &h * &mask;

    let mut logp = params.logits(&hd);
    log_softmax_rows(&mut logp);

    // dL/dlogits = w/norm * (softmax - onehot)
    let mut dlogits = logp.mapv(f64::exp);
    let mut loss = 0.0;
    let mut row = 0;
    for ex in batch {
        for (&t, &w) in ex.targets.iter().zip(ex.weights) {
            let mut d = dlogits.row_mut(row);
            if w == 0.0 {
                d.fill(0.0);
            } else {
                loss -= w * logp[[row, t]];
                d[t] -= 1.0;
                d *= w / norm;
            }
            row += 1;
        }
    }
    loss /= norm;

    grads.output_w = hd.t().dot(&dlogits);
    grads.output_b = dlogits.sum_axis(Axis(0));

    let dhd = dlogits.dot(&params.output_w.t());
    // through dropout and tanh
    let dpre = dhd * &mask * &h.mapv(|v| 1.0 - v * v);
    grads.hidden_w = x.t().dot(&dpre);
    grads.hidden_b = dpre.sum_axis(Axis(0));

    let dx = dpre.dot(&params.hidden_w.t());
    let d = arch.embedding_dim;
    let w = arch.window_radius as isize;
    let mut row = 0;
    for ex in batch {
        for i in 0..ex.ids.len() {
            let drow = dx.row(row);
            for (slot, off) in (-w..=w).enumerate() {
                let id = window_id(ex.ids, i as isize + off);
                let mut g = grads.embedding.row_mut(id);
                g += &drow.slice(s![slot * d..(slot + 1) * d]);
            }
            row += 1;
        }
    }

    Ok(LossGrad {
        loss,
        grads,
        weight_sum,
        empty: false,
    })
}
