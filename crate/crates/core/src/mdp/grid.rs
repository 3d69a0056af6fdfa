use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Mdp, Transition, TransitionSample};
use crate::{Error, Result};

/// Grid cell as `(row, column)`, 1-based, row 1 at the top.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell(pub usize, pub usize);

/// Row and column displacement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Action {
    pub name: &'static str,
    pub dr: isize,
    pub dc: isize,
}

/// The eight compass moves, clockwise from up, then stay.
pub const ACTIONS: [Action; 9] = [
    Action {
        name: "up",
        dr: -1,
        dc: 0,
    },
    Action {
        name: "up-right",
        dr: -1,
        dc: 1,
    },
    Action {
        name: "right",
        dr: 0,
        dc: 1,
    },
    Action {
        name: "down-right",
        dr: 1,
        dc: 1,
    },
    Action {
        name: "down",
        dr: 1,
        dc: 0,
    },
    Action {
        name: "down-left",
        dr: 1,
        dc: -1,
    },
    Action {
        name: "left",
        dr: 0,
        dc: -1,
    },
    Action {
        name: "up-left",
        dr: -1,
        dc: -1,
    },
    Action {
        name: "stay",
        dr: 0,
        dc: 0,
    },
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub seed: u64,
    pub step_min: f64,
    pub step_max: f64,
    pub goal: f64,
    pub trap: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            step_min: -0.1,
            step_max: 0.0,
            goal: 1.0,
            trap: -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub start: Cell,
    pub goal: Cell,
    pub traps: Vec<Cell>,
    pub max_steps: usize,
    pub gamma: f64,
    pub rewards: RewardConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            width: 6,
            height: 6,
            start: Cell(1, 1),
            goal: Cell(6, 6),
            traps: vec![Cell(2, 3), Cell(4, 2), Cell(5, 5)],
            max_steps: 100,
            gamma: 0.9,
            rewards: RewardConfig::default(),
        }
    }
}

impl GridConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        let inside = |c: Cell| (1..=self.height).contains(&c.0) && (1..=self.width).contains(&c.1);
        for c in std::iter::once(self.start)
            .chain(std::iter::once(self.goal))
            .chain(self.traps.iter().copied())
        {
            if !inside(c) {
                return Err(Error::InvalidGrid(format!("cell {c:?} outside the grid")));
            }
        }
        if self.goal == self.start || self.traps.contains(&self.start) {
            return Err(Error::InvalidGrid("start overlaps a goal or trap".into()));
        }
        if self.traps.contains(&self.goal) {
            return Err(Error::InvalidGrid("goal overlaps a trap".into()));
        }
        for (i, t) in self.traps.iter().enumerate() {
            if self.traps[..i].contains(t) {
                return Err(Error::InvalidGrid(format!("trap {t:?} repeated")));
            }
        }
        if !(self.rewards.step_min <= self.rewards.step_max) {
            return Err(Error::InvalidGrid("step reward range is empty".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidGrid("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Deterministic grid world. Entering a cell earns that cell's reward;
/// goal and traps are absorbing.
#[derive(Clone, Debug)]
pub struct GridWorld {
    config: GridConfig,
    mdp: Mdp,
    cell_rewards: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl GridWorld {
    pub fn new(config: GridConfig) -> Result<Self> {
        config.validate()?;
        let (w, h) = (config.width, config.height);
        let n = w * h;
        let index = |c: Cell| (c.0 - 1) * w + (c.1 - 1);

        let mut rng = ChaCha8Rng::seed_from_u64(config.rewards.seed);
        let r = &config.rewards;
        let mut cell_rewards: Vec<f64> = (0..n)
            .map(|_| {
                if r.step_min == r.step_max {
                    r.step_min
                } else {
                    rng.gen_range(r.step_min..r.step_max)
                }
            })
            .collect();
        let mut terminal = vec![false; n];
        cell_rewards[index(config.goal)] = r.goal;
        terminal[index(config.goal)] = true;
        for &t in &config.traps {
            cell_rewards[index(t)] = r.trap;
            terminal[index(t)] = true;
        }

        let mut rows = Vec::with_capacity(n * ACTIONS.len());
        for s in 0..n {
            for a in &ACTIONS {
                let row = if terminal[s] {
                    Transition {
                        next: s,
                        prob: 1.0,
                        reward: 0.0,
                    }
                } else {
                    let next = Self::moved(w, h, s, a.dr, a.dc).unwrap_or(s);
                    Transition {
                        next,
                        prob: 1.0,
                        reward: cell_rewards[next],
                    }
                };
                rows.push(vec![row]);
            }
        }
        let neighbors = (0..n)
            .map(|s| {
                ACTIONS[..8]
                    .iter()
                    .filter_map(|a| Self::moved(w, h, s, a.dr, a.dc))
                    .collect()
            })
            .collect();
        let mdp = Mdp::new(n, ACTIONS.len(), rows, config.gamma, terminal)?;
        Ok(Self {
            config,
            mdp,
            cell_rewards,
            neighbors,
        })
    }

    fn moved(w: usize, h: usize, s: usize, dr: isize, dc: isize) -> Option<usize> {
        let r = (s / w) as isize + dr;
        let c = (s % w) as isize + dc;
        if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
            None
        } else {
            Some(r as usize * w + c as usize)
        }
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn n_states(&self) -> usize {
        self.mdp.n_states()
    }

    pub fn state(&self, cell: Cell) -> usize {
        (cell.0 - 1) * self.config.width + (cell.1 - 1)
    }

    pub fn cell(&self, s: usize) -> Cell {
        Cell(s / self.config.width + 1, s % self.config.width + 1)
    }

    pub fn start(&self) -> usize {
        self.state(self.config.start)
    }

    pub fn goal(&self) -> usize {
        self.state(self.config.goal)
    }

    pub fn traps(&self) -> Vec<usize> {
        self.config.traps.iter().map(|&c| self.state(c)).collect()
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.mdp.is_terminal(s)
    }

    pub fn is_trap(&self, s: usize) -> bool {
        self.config.traps.iter().any(|&c| self.state(c) == s)
    }

    /// Reward for entering `s`.
    pub fn cell_reward(&self, s: usize) -> f64 {
        self.cell_rewards[s]
    }

    /// State cost `l(s) = clip(-r(s), 0, 1)`.
    pub fn cost(&self, s: usize) -> f64 {
        (-self.cell_rewards[s]).clamp(0.0, 1.0)
    }

    /// Fixed desirability of an absorbing state, `exp(-l(s))`.
    pub fn terminal_desirability(&self, s: usize) -> f64 {
        (-self.cost(s)).exp()
    }

    pub fn neighbors(&self, s: usize) -> &[usize] {
        &self.neighbors[s]
    }

    pub fn step<R: Rng + ?Sized>(
        &self,
        s: usize,
        a: usize,
        rng: &mut R,
    ) -> Result<TransitionSample> {
        self.mdp.step(s, a, rng)
    }

    /// Uniform move to one of the in-bounds neighbors of `s`; reports the
    /// cost of `s`.
    pub fn passive_step<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Result<TransitionSample> {
        if s >= self.n_states() {
            return Err(Error::InvalidMdp(format!("state {s} out of range")));
        }
        if self.is_terminal(s) {
            return Err(Error::TerminalState(s));
        }
        let nb = &self.neighbors[s];
        let next = nb[rng.gen_range(0..nb.len())];
        Ok(TransitionSample {
            state: s,
            action: None,
            reward: self.cell_rewards[s],
            cost: self.cost(s),
            next,
            episode: 0,
            step: 0,
        })
    }
}
