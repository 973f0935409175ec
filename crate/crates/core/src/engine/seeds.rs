//! Named random streams derived from the root seed.

use rand::seq::SliceRandom;

use crate::rng::{mix, seeded, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPlan {
    pub root: u64,
}

impl SeedPlan {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn init(&self, net: usize) -> u64 {
        mix(self.root, &[stream::INIT, net as u64])
    }

    /// Sentence order of pre-training epoch `epoch` for network `net`.
    pub fn pretrain_order(&self, net: usize, epoch: usize, n: usize) -> Vec<usize> {
        shuffled(
            mix(
                self.root,
                &[stream::PRETRAIN_ORDER, net as u64, epoch as u64],
            ),
            n,
        )
    }

    pub fn pretrain_dropout(&self, net: usize, step: u64, position: usize) -> u64 {
        mix(
            self.root,
            &[stream::PRETRAIN_DROPOUT, net as u64, step, position as u64],
        )
    }

    /// Sentence order of self-training epoch `epoch`, shared by both networks.
    pub fn epoch_order(&self, epoch: usize, n: usize) -> Vec<usize> {
        shuffled(mix(self.root, &[stream::EPOCH_ORDER, epoch as u64]), n)
    }

    pub fn train_dropout(&self, net: usize, step: u64, position: usize) -> u64 {
        mix(
            self.root,
            &[stream::TRAIN_DROPOUT, net as u64, step, position as u64],
        )
    }

    /// Base seed of the uncertainty passes at self-training step `step`.
    pub fn mc(&self, net: usize, step: u64) -> u64 {
        mix(self.root, &[stream::MC_DROPOUT, net as u64, step])
    }

    pub fn refresh_mc(&self, net: usize, refresh: u64) -> u64 {
        mix(self.root, &[stream::REFRESH_MC, net as u64, refresh])
    }
}

fn shuffled(seed: u64, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    order
}

/// Consecutive chunks of `order`; the last one may be short.
pub fn batches(order: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    order
        .chunks(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}
