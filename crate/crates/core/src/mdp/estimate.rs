use std::collections::BTreeMap;

use super::{Mdp, Transition, TransitionSample};
use crate::{Error, Result};

/// Empirical model: visited rows are normalized counts; unvisited rows
/// are zero-reward self-loops and flagged.
#[derive(Clone, Debug)]
pub struct EstimatedModel {
    pub mdp: Mdp,
    pub visited: Vec<bool>,
}

impl EstimatedModel {
    pub fn is_visited(&self, s: usize, a: usize) -> bool {
        self.visited[s * self.mdp.n_actions() + a]
    }
}

/// Running counts `N(s, a, s')` and reward sums.
#[derive(Clone, Debug)]
pub struct ModelEstimator {
    n_states: usize,
    n_actions: usize,
    // per (s, a): next -> (count, reward sum)
    counts: Vec<BTreeMap<usize, (u64, f64)>>,
}

impl ModelEstimator {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            counts: vec![BTreeMap::new(); n_states * n_actions],
        }
    }

    pub fn observe(&mut self, sample: &TransitionSample) -> Result<()> {
        let a = sample
            .action
            .ok_or_else(|| Error::InvalidMdp("sample without an action".into()))?;
        if sample.state >= self.n_states || sample.next >= self.n_states || a >= self.n_actions {
            return Err(Error::InvalidMdp(format!(
                "sample out of range: {sample:?}"
            )));
        }
        let e = self.counts[sample.state * self.n_actions + a]
            .entry(sample.next)
            .or_insert((0, 0.0));
        e.0 += 1;
        e.1 += sample.reward;
        Ok(())
    }

    /// `Σ P̂(s'|s,a) (R̂(s,a,s') + γ V(s'))`, or `None` before the first
    /// visit of `(s, a)`.
    pub fn lookahead(&self, s: usize, a: usize, values: &[f64], gamma: f64) -> Option<f64> {
        let row = &self.counts[s * self.n_actions + a];
        let total: u64 = row.values().map(|c| c.0).sum();
        if total == 0 {
            return None;
        }
        let sum: f64 = row
            .iter()
            .map(|(&next, &(count, rsum))| rsum + count as f64 * gamma * values[next])
            .sum();
        Some(sum / total as f64)
    }

    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.counts[s * self.n_actions + a]
            .values()
            .map(|c| c.0)
            .sum()
    }

    /// Outcomes of `(s, a)` as `(next, probability, mean reward)`; empty
    /// when never visited.
    pub fn row(&self, s: usize, a: usize) -> Vec<Transition> {
        let row = &self.counts[s * self.n_actions + a];
        let total: u64 = row.values().map(|c| c.0).sum();
        row.iter()
            .map(|(&next, &(n, sum))| Transition {
                next,
                prob: n as f64 / total as f64,
                reward: sum / n as f64,
            })
            .collect()
    }

    pub fn model(&self, gamma: f64, terminal: Vec<bool>) -> Result<EstimatedModel> {
        let mut rows = Vec::with_capacity(self.counts.len());
        let mut visited = Vec::with_capacity(self.counts.len());
        for (i, _) in self.counts.iter().enumerate() {
            let row = self.row(i / self.n_actions, i % self.n_actions);
            visited.push(!row.is_empty());
            rows.push(if row.is_empty() {
                vec![Transition {
                    next: i / self.n_actions,
                    prob: 1.0,
                    reward: 0.0,
                }]
            } else {
                normalize(row)
            });
        }
        Ok(EstimatedModel {
            mdp: Mdp::new(self.n_states, self.n_actions, rows, gamma, terminal)?,
            visited,
        })
    }
}

// Moves float rounding into the largest entry so the row sums to one.
fn normalize(mut row: Vec<Transition>) -> Vec<Transition> {
    let total: f64 = row.iter().map(|t| t.prob).sum();
    let big = (0..row.len())
        .max_by(|&i, &j| row[i].prob.total_cmp(&row[j].prob))
        .expect("non-empty row");
    row[big].prob += 1.0 - total;
    row
}

/// `P̂(s'|s,a) = N(s,a,s') / N(s,a)` and mean observed rewards.
pub fn estimate_model(
    samples: &[TransitionSample],
    n_states: usize,
    n_actions: usize,
    gamma: f64,
) -> Result<EstimatedModel> {
    if samples.is_empty() {
        return Err(Error::InsufficientTrajectory(
            "no samples to estimate from".into(),
        ));
    }
    let mut est = ModelEstimator::new(n_states, n_actions);
    for s in samples {
        est.observe(s)?;
    }
    est.model(gamma, vec![false; n_states])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(s: usize, a: usize, next: usize, r: f64) -> TransitionSample {
        TransitionSample {
            state: s,
            action: Some(a),
            reward: r,
            cost: 0.0,
            next,
            episode: 0,
            step: 0,
        }
    }

    #[test]
    fn lookahead_averages_observed_outcomes() {
        let mut est = ModelEstimator::new(3, 1);
        assert_eq!(est.lookahead(0, 0, &[0.0, 1.0, 2.0], 0.5), None);
        est.observe(&sample(0, 0, 1, 1.0)).unwrap();
        est.observe(&sample(0, 0, 2, -1.0)).unwrap();
        est.observe(&sample(0, 0, 2, -1.0)).unwrap();
        // (1 + 0.5) / 3 + 2 (-1 + 1) / 3
        let q = est.lookahead(0, 0, &[0.0, 1.0, 2.0], 0.5).unwrap();
        assert!((q - 0.5).abs() < 1e-15);
    }

    #[test]
    fn counting() {
        let m = estimate_model(&[sample(0, 0, 1, 1.0)], 2, 1, 0.9).unwrap();
        assert_eq!(m.mdp.prob(0, 0, 1), 1.0);
        assert!(m.is_visited(0, 0) && !m.is_visited(1, 0));

        let s = vec![
            sample(0, 0, 1, 1.0),
            sample(0, 0, 1, 3.0),
            sample(0, 0, 1, 2.0),
            sample(0, 0, 2, 0.0),
        ];
        let m = estimate_model(&s, 3, 1, 0.9).unwrap();
        assert_eq!(m.mdp.prob(0, 0, 1), 0.75);
        assert_eq!(m.mdp.prob(0, 0, 2), 0.25);
        assert_eq!(m.mdp.expected_reward(0, 0), 1.5);
        assert!(estimate_model(&[], 3, 1, 0.9).is_err());
    }

    #[test]
    fn converges_to_known_kernel() {
        let truth = crate::mdp::tests::three_state();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut samples = Vec::new();
        for i in 0..100_000 {
            samples.push(truth.step(i % 3, 0, &mut rng).unwrap());
        }
        let m = estimate_model(&samples, 3, 1, 0.9).unwrap();
        for s in 0..3 {
            for n in 0..3 {
                assert!((m.mdp.prob(s, 0, n) - truth.prob(s, 0, n)).abs() <= 0.05);
            }
        }
    }
}
