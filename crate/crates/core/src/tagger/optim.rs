use super::TaggerParams;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: TaggerParams,
    pub v: TaggerParams,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &TaggerParams, lr: f64) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Clears both moments and the step counter.
    pub fn reset(&mut self) {
        self.m = self.m.zeros_like();
        self.v = self.v.zeros_like();
        self.t = 0;
    }
}

/// One bias-corrected Adam update with `state.lr`.
pub fn adam_step(
    params: &mut TaggerParams,
    grads: &TaggerParams,
    state: &mut AdamState,
) -> Result<()> {
    params.check_same_shape(grads)?;
    params.check_same_shape(&state.m)?;
    for (name, g) in grads.blocks() {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { block: name });
        }
    }
    state.t += 1;
    let (b1, b2, eps, lr) = (state.beta1, state.beta2, state.eps, state.lr);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let blocks = params
        .blocks_mut()
        .into_iter()
        .zip(grads.blocks())
        .zip(state.m.blocks_mut().into_iter().zip(state.v.blocks_mut()));
    for (((_, p), (_, g)), ((_, m), (_, v))) in blocks {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Linear warmup to `base_lr` over `warmup_steps`, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarmupSchedule {
    pub base_lr: f64,
    pub warmup_steps: u64,
}

impl WarmupSchedule {
    /// Learning rate for 1-based optimizer step `step`.
    pub fn lr_at(&self, step: u64) -> f64 {
        if self.warmup_steps == 0 || step >= self.warmup_steps {
            self.base_lr
        } else {
            self.base_lr * step as f64 / self.warmup_steps as f64
        }
    }
}

/// `teacher <- alpha * teacher + (1 - alpha) * student`, elementwise, clamped
/// to the segment between the two operands.
pub fn ema_update(teacher: &mut TaggerParams, student: &TaggerParams, alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::config(format!("EMA alpha {alpha} outside [0, 1]")));
    }
    teacher.check_same_shape(student)?;
    for ((_, t), (_, s)) in teacher.blocks_mut().into_iter().zip(student.blocks()) {
        for (t, &s) in t.iter_mut().zip(s) {
            let mixed = alpha * *t + (1.0 - alpha) * s;
            *t = mixed.clamp(t.min(s), t.max(s));
        }
    }
    Ok(())
}
