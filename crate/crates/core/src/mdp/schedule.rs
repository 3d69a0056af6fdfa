use rand::Rng;
use serde::{Deserialize, Serialize};

/// Learning hyperparameters shared by the learners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub gamma: f64,
    /// `c` in `α = c / (c + n)`.
    pub lr_constant: f64,
    /// Degree of the polynomial replacing `exp(-l)` under encryption.
    pub taylor_degree: usize,
    /// Costs are clipped into `[0, max_cost]`.
    pub max_cost: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            lr_constant: 500.0,
            taylor_degree: 5,
            max_cost: 1.0,
        }
    }
}

impl Hyperparams {
    /// Step size after `visits` earlier updates of the same entry.
    pub fn learning_rate(&self, visits: u64) -> f64 {
        self.lr_constant / (self.lr_constant + visits as f64)
    }
}

/// Exploration rate for `episode` out of `total`, falling linearly from 1
/// at the first episode to 0 at the last.
pub fn glie_epsilon(episode: usize, total: usize) -> f64 {
    let last = total.saturating_sub(1).max(1);
    (1.0 - episode as f64 / last as f64).clamp(0.0, 1.0)
}

/// First index of the maximum.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// Uniform action with probability `eps`, greedy otherwise.
pub fn glie_action<R: Rng + ?Sized>(row: &[f64], eps: f64, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    if u < eps {
        rng.gen_range(0..row.len())
    } else {
        argmax(row)
    }
}
