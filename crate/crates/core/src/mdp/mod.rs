//! Finite MDPs, the grid world, exploration schedules and model estimation.

mod estimate;
mod grid;
mod schedule;

use rand::Rng;

use crate::{Error, Result};

pub use estimate::{estimate_model, EstimatedModel, ModelEstimator};
pub use grid::{Action, Cell, GridConfig, GridWorld, RewardConfig, ACTIONS};
pub use schedule::{argmax, glie_action, glie_epsilon, Hyperparams};

/// One outcome of a state-action pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// Finite MDP with sparse transition rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    // row s * n_actions + a
    rows: Vec<Vec<Transition>>,
    gamma: f64,
    terminal: Vec<bool>,
}

/// `(s, a, r, s')` observed at a given episode and step. Samples drawn
/// from passive dynamics carry no action and a cost in place of reward.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionSample {
    pub state: usize,
    pub action: Option<usize>,
    pub reward: f64,
    pub cost: f64,
    pub next: usize,
    pub episode: usize,
    pub step: usize,
}

const ROW_TOLERANCE: f64 = 1e-12;

impl Mdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        rows: Vec<Vec<Transition>>,
        gamma: f64,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp("empty state or action set".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!(
                "discount {gamma} outside [0, 1)"
            )));
        }
        if rows.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch {
                expected: n_states * n_actions,
                actual: rows.len(),
            });
        }
        if terminal.len() != n_states {
            return Err(Error::DimensionMismatch {
                expected: n_states,
                actual: terminal.len(),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            let mut total = 0.0;
            for t in row {
                if t.next >= n_states || !(t.prob >= 0.0) || !t.reward.is_finite() {
                    return Err(Error::InvalidMdp(format!(
                        "bad transition in row {i}: {t:?}"
                    )));
                }
                total += t.prob;
            }
            if (total - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::InvalidMdp(format!("row {i} sums to {total}")));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            rows,
            gamma,
            terminal,
        })
    }

    /// Dense random MDP: every row has full support and rewards in
    /// `[-1, 1]`. No terminal states.
    pub fn random<R: Rng + ?Sized>(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let rows = (0..n_states * n_actions)
            .map(|_| {
                let w: Vec<f64> = (0..n_states).map(|_| rng.gen_range(0.01..1.0)).collect();
                let total: f64 = w.iter().sum();
                let mut row: Vec<Transition> = w
                    .iter()
                    .enumerate()
                    .map(|(next, &x)| Transition {
                        next,
                        prob: x / total,
                        reward: rng.gen_range(-1.0..1.0),
                    })
                    .collect();
                // push rounding into the last entry so the row sums to one
                let head: f64 = row[..n_states - 1].iter().map(|t| t.prob).sum();
                row[n_states - 1].prob = 1.0 - head;
                row
            })
            .collect();
        Self::new(n_states, n_actions, rows, gamma, vec![false; n_states])
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(
            self.n_states,
            self.n_actions,
            self.rows.clone(),
            gamma,
            self.terminal.clone(),
        )
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_states(&self) -> &[bool] {
        &self.terminal
    }

    pub fn transitions(&self, s: usize, a: usize) -> &[Transition] {
        &self.rows[s * self.n_actions + a]
    }

    /// Probability of `next` under `(s, a)`.
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transitions(s, a)
            .iter()
            .filter(|t| t.next == next)
            .map(|t| t.prob)
            .sum()
    }

    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        self.transitions(s, a)
            .iter()
            .map(|t| t.prob * t.reward)
            .sum()
    }

    /// Samples `s' ~ P(.|s, a)` and its reward.
    pub fn step<R: Rng + ?Sized>(
        &self,
        s: usize,
        a: usize,
        rng: &mut R,
    ) -> Result<TransitionSample> {
        if s >= self.n_states || a >= self.n_actions {
            return Err(Error::InvalidMdp(format!(
                "state {s} or action {a} out of range"
            )));
        }
        if self.terminal[s] {
            return Err(Error::TerminalState(s));
        }
        let row = self.transitions(s, a);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = row[row.len() - 1];
        for t in row {
            acc += t.prob;
            if u < acc {
                chosen = *t;
                break;
            }
        }
        Ok(TransitionSample {
            state: s,
            action: Some(a),
            reward: chosen.reward,
            cost: (-chosen.reward).clamp(0.0, 1.0),
            next: chosen.next,
            episode: 0,
            step: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn three_state() -> Mdp {
        let t = |next, prob| Transition {
            next,
            prob,
            reward: next as f64,
        };
        let rows = vec![
            vec![t(0, 0.2), t(1, 0.5), t(2, 0.3)],
            vec![t(0, 0.6), t(2, 0.4)],
            vec![t(1, 1.0)],
        ];
        Mdp::new(3, 1, rows, 0.9, vec![false; 3]).unwrap()
    }

    #[test]
    fn validation() {
        let t = |next, prob| Transition {
            next,
            prob,
            reward: 0.0,
        };
        assert!(Mdp::new(1, 1, vec![vec![t(0, 0.9)]], 0.9, vec![false]).is_err());
        assert!(Mdp::new(1, 1, vec![vec![t(0, 1.0)]], 1.0, vec![false]).is_err());
        assert!(Mdp::new(1, 1, vec![vec![t(1, 1.0)]], 0.5, vec![false]).is_err());
        assert!(Mdp::new(1, 1, vec![vec![t(0, 1.0)]], 0.5, vec![false]).is_ok());
    }

    #[test]
    fn random_rows_are_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Mdp::random(8, 3, 0.9, &mut rng).unwrap();
        for s in 0..8 {
            for a in 0..3 {
                let sum: f64 = m.transitions(s, a).iter().map(|t| t.prob).sum();
                assert!((sum - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn step_frequencies_match_kernel() {
        let m = three_state();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for s in 0..3 {
            let mut counts = [0usize; 3];
            for _ in 0..100_000 {
                counts[m.step(s, 0, &mut rng).unwrap().next] += 1;
            }
            let tv: f64 = (0..3)
                .map(|n| (counts[n] as f64 / 1e5 - m.prob(s, 0, n)).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv <= 0.01, "state {s}: tv {tv}");
        }
    }

    #[test]
    fn step_from_terminal_fails() {
        let t = Transition {
            next: 0,
            prob: 1.0,
            reward: 0.0,
        };
        let m = Mdp::new(1, 1, vec![vec![t]], 0.9, vec![true]).unwrap();
        assert!(matches!(
            m.step(0, 0, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::TerminalState(0))
        ));
    }
}
