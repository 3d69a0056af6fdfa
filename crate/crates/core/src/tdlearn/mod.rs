//! Model-free learners on the grid world: TD(0), SARSA(0) and Z-learning.
//!
//! A learner keeps a plaintext table and, when an [`UpdateEngine`] is
//! supplied, a shadow table updated through that engine from the same
//! samples. The gap between the two is recorded after every update.

mod engine;
mod export;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mdp::{
    argmax, glie_action, glie_epsilon, GridWorld, Hyperparams, ModelEstimator, TransitionSample,
    ACTIONS,
};
use crate::protocol::{taylor_exp, taylor_remainder, Rule, TdInputs, ZInputs, MAX_DEGREE};
use crate::{Error, Result};

pub use engine::{EngineOutput, ProtocolEngine, UpdateEngine};
pub use export::{write_trace_csv, write_values_csv};

/// Episodes per run unless configured otherwise.
pub const DEFAULT_EPISODES: usize = 5000;

// relative rounding allowance of one plaintext update
const ROUNDING: f64 = 16.0 * f64::EPSILON;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Td0,
    Sarsa,
    Z,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Td0, Algorithm::Sarsa, Algorithm::Z];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Td0 => "td0",
            Algorithm::Sarsa => "sarsa",
            Algorithm::Z => "z",
        }
    }

    pub fn rule(self) -> Rule {
        match self {
            Algorithm::Td0 => Rule::Td0,
            Algorithm::Sarsa => Rule::Sarsa,
            Algorithm::Z => Rule::Z,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown learner {s:?}")))
    }
}

/// `v + α r + α γ v' - α v`, evaluated in the same order as the circuit.
pub fn td_update_value(v: f64, v_next: f64, alpha: f64, gamma: f64, reward: f64) -> f64 {
    let ag = alpha * gamma;
    let agv = ag * v_next;
    let ar = alpha * reward;
    let av = alpha * v;
    ((agv + ar) + v) - av
}

/// `z + α exp(-l) z' - α z`, evaluated in the same order as the circuit.
pub fn z_update_value(z: f64, z_next: f64, alpha: f64, cost: f64) -> f64 {
    let t = (-cost).exp();
    let az_next = alpha * z_next;
    let tz = t * az_next;
    let az = alpha * z;
    (tz + z) - az
}

/// One row of an [`ErrorTrace`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry {
    /// 1-based update count.
    pub iteration: usize,
    /// `max |plain - shadow|` over the whole table.
    pub max_error: f64,
    pub state: usize,
    pub action: Option<usize>,
    /// Plaintext value written by this update.
    pub value: f64,
    /// `|plain - shadow|` at the updated entry.
    pub state_error: f64,
    /// Largest propagated error bound over the table.
    pub bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorTrace {
    entries: Vec<TraceEntry>,
}

impl ErrorTrace {
    pub fn from_entries(entries: Vec<TraceEntry>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }

    pub fn max_error(&self) -> f64 {
        self.entries.iter().map(|e| e.max_error).fold(0.0, f64::max)
    }

    /// Whether every entry stays within its propagated bound.
    pub fn within_bound(&self) -> bool {
        self.entries.iter().all(|e| e.max_error <= e.bound)
    }
}

/// Tables, counters and trace of one learning run.
#[derive(Clone, Debug)]
pub struct LearnerState {
    algorithm: Algorithm,
    n_states: usize,
    width: usize,
    terminal: Vec<bool>,
    plain: Vec<f64>,
    shadow: Option<Vec<f64>>,
    bound: Vec<f64>,
    visits: Vec<u64>,
    model: Option<ModelEstimator>,
    trace: ErrorTrace,
    path: crc32fast::Hasher,
    pub episodes: usize,
    pub clipped_costs: usize,
    pub negative_z: usize,
}

impl LearnerState {
    /// Fresh tables: `V = 0`, `Q = 0`, and `Z = 1` except at absorbing
    /// states, which hold their fixed desirability.
    pub fn new(algorithm: Algorithm, world: &GridWorld, shadow: bool) -> Self {
        let n = world.n_states();
        let width = match algorithm {
            Algorithm::Sarsa => ACTIONS.len(),
            Algorithm::Td0 | Algorithm::Z => 1,
        };
        let plain: Vec<f64> = match algorithm {
            Algorithm::Td0 | Algorithm::Sarsa => vec![0.0; n * width],
            Algorithm::Z => (0..n)
                .map(|s| {
                    if world.is_terminal(s) {
                        world.terminal_desirability(s)
                    } else {
                        1.0
                    }
                })
                .collect(),
        };
        Self {
            algorithm,
            n_states: n,
            width,
            terminal: (0..n).map(|s| world.is_terminal(s)).collect(),
            shadow: shadow.then(|| plain.clone()),
            bound: vec![0.0; plain.len()],
            visits: vec![0; plain.len()],
            plain,
            model: (algorithm == Algorithm::Td0).then(|| ModelEstimator::new(n, ACTIONS.len())),
            trace: ErrorTrace::default(),
            path: crc32fast::Hasher::new(),
            episodes: 0,
            clipped_costs: 0,
            negative_z: 0,
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Entries per state: 1 for `V` and `Z`, one per action for `Q`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn plain(&self) -> &[f64] {
        &self.plain
    }

    pub fn shadow(&self) -> Option<&[f64]> {
        self.shadow.as_deref()
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bound
    }

    pub fn visits(&self) -> &[u64] {
        &self.visits
    }

    pub fn trace(&self) -> &ErrorTrace {
        &self.trace
    }

    pub fn updates(&self) -> usize {
        self.trace.len()
    }

    /// Transition counts seen by a TD(0) learner.
    pub fn model(&self) -> Option<&ModelEstimator> {
        self.model.as_ref()
    }

    /// CRC-32 over every sample consumed so far.
    pub fn fingerprint(&self) -> u32 {
        self.path.clone().finalize()
    }

    /// Per-state values: the table itself for `V` and `Z`, `max_a Q` for `Q`.
    pub fn state_values(&self) -> Vec<f64> {
        per_state(&self.plain, self.width)
    }

    pub fn shadow_state_values(&self) -> Option<Vec<f64>> {
        self.shadow.as_ref().map(|t| per_state(t, self.width))
    }

    pub fn td0_update(
        &mut self,
        h: &TransitionSample,
        hp: &Hyperparams,
        engine: Option<&mut (dyn UpdateEngine + '_)>,
    ) -> Result<()> {
        self.expect(Algorithm::Td0)?;
        self.check_sample(h)?;
        if let Some(m) = &mut self.model {
            m.observe(h)?;
        }
        self.td_step(Rule::Td0, h.state, h.next, h, hp, engine)
    }

    /// `next_action` is `a'`, already drawn by the behaviour policy.
    pub fn sarsa_update(
        &mut self,
        h: &TransitionSample,
        next_action: usize,
        hp: &Hyperparams,
        engine: Option<&mut (dyn UpdateEngine + '_)>,
    ) -> Result<()> {
        self.expect(Algorithm::Sarsa)?;
        self.check_sample(h)?;
        let a = h
            .action
            .ok_or_else(|| Error::InvalidMdp("SARSA sample without an action".into()))?;
        if a >= self.width || next_action >= self.width {
            return Err(Error::InvalidMdp(format!(
                "action {a} or {next_action} out of range"
            )));
        }
        let entry = h.state * self.width + a;
        let next = h.next * self.width + next_action;
        self.td_step(Rule::Sarsa, entry, next, h, hp, engine)
    }

    pub fn z_update(
        &mut self,
        h: &TransitionSample,
        hp: &Hyperparams,
        engine: Option<&mut (dyn UpdateEngine + '_)>,
    ) -> Result<()> {
        self.expect(Algorithm::Z)?;
        self.check_sample(h)?;
        if h.cost.is_nan() {
            return Err(Error::ApproximationDomain {
                x: -h.cost,
                limit: hp.max_cost,
            });
        }
        let mut cost = h.cost;
        if !(0.0..=hp.max_cost).contains(&cost) {
            self.clipped_costs += 1;
            cost = cost.clamp(0.0, hp.max_cost);
        }
        let (s, next) = (h.state, h.next);
        let alpha = hp.learning_rate(self.visits[s]);
        let k = hp.taylor_degree;
        let z = self.plain[s];
        let z_next = self.plain[next];
        let updated = z_update_value(z, z_next, alpha, cost);
        let shadow = match (self.shadow.as_mut(), engine) {
            (Some(table), Some(engine)) => {
                let out = engine.z(
                    &ZInputs {
                        value: table[s],
                        next_value: table[next],
                        alpha,
                        cost,
                    },
                    k,
                )?;
                table[s] = out.value;
                let t = taylor_exp(-cost, k, hp.max_cost)?;
                let rem = taylor_remainder(k, cost);
                self.bound[s] = (1.0 - alpha) * self.bound[s]
                    + alpha * t.abs() * self.bound[next]
                    + alpha * rem * z_next.abs()
                    + out.epsilon
                    + ROUNDING * (1.0 + z.abs() + z_next.abs());
                Some(out.value)
            }
            (None, None) => None,
            _ => {
                return Err(Error::Config(
                    "shadow table and engine must come together".into(),
                ))
            }
        };
        self.plain[s] = updated;
        if updated < 0.0 || shadow.is_some_and(|x| x < 0.0) {
            self.negative_z += 1;
        }
        self.finish(s, h);
        Ok(())
    }

    fn td_step(
        &mut self,
        rule: Rule,
        entry: usize,
        next: usize,
        h: &TransitionSample,
        hp: &Hyperparams,
        engine: Option<&mut (dyn UpdateEngine + '_)>,
    ) -> Result<()> {
        let alpha = hp.learning_rate(self.visits[entry]);
        let gamma = hp.gamma;
        let v = self.plain[entry];
        let v_next = self.plain[next];
        let updated = td_update_value(v, v_next, alpha, gamma, h.reward);
        match (self.shadow.as_mut(), engine) {
            (Some(table), Some(engine)) => {
                let out = engine.td(
                    rule,
                    &TdInputs {
                        value: table[entry],
                        next_value: table[next],
                        alpha,
                        gamma,
                        reward: h.reward,
                    },
                )?;
                table[entry] = out.value;
                self.bound[entry] = (1.0 - alpha) * self.bound[entry]
                    + alpha * gamma * self.bound[next]
                    + out.epsilon
                    + ROUNDING * (1.0 + v.abs() + v_next.abs() + h.reward.abs());
            }
            (None, None) => {}
            _ => {
                return Err(Error::Config(
                    "shadow table and engine must come together".into(),
                ))
            }
        }
        self.plain[entry] = updated;
        self.finish(entry, h);
        Ok(())
    }

    fn expect(&self, algorithm: Algorithm) -> Result<()> {
        if self.algorithm != algorithm {
            return Err(Error::Config(format!(
                "{algorithm} update applied to a {} learner",
                self.algorithm
            )));
        }
        Ok(())
    }

    fn check_sample(&self, h: &TransitionSample) -> Result<()> {
        if h.state >= self.n_states || h.next >= self.n_states {
            return Err(Error::InvalidMdp(format!("sample out of range: {h:?}")));
        }
        if self.terminal[h.state] {
            return Err(Error::TerminalState(h.state));
        }
        Ok(())
    }

    fn finish(&mut self, entry: usize, h: &TransitionSample) {
        self.visits[entry] += 1;
        self.path.update(&(h.episode as u64).to_le_bytes());
        self.path.update(&(h.step as u64).to_le_bytes());
        self.path.update(&(h.state as u64).to_le_bytes());
        self.path
            .update(&h.action.map_or(u64::MAX, |a| a as u64).to_le_bytes());
        self.path.update(&(h.next as u64).to_le_bytes());
        self.path.update(&h.reward.to_le_bytes());
        self.path.update(&h.cost.to_le_bytes());

        let (max_error, state_error, bound) = match &self.shadow {
            Some(t) => (
                self.plain
                    .iter()
                    .zip(t)
                    .map(|(p, s)| (p - s).abs())
                    .fold(0.0, f64::max),
                (self.plain[entry] - t[entry]).abs(),
                self.bound.iter().copied().fold(0.0, f64::max),
            ),
            None => (0.0, 0.0, 0.0),
        };
        self.trace.entries.push(TraceEntry {
            iteration: self.trace.entries.len() + 1,
            max_error,
            state: entry / self.width,
            action: (self.width > 1).then_some(entry % self.width),
            value: self.plain[entry],
            state_error,
            bound,
        });
    }

    /// Greedy action in `s`. TD(0) looks one step ahead on its estimated
    /// model, SARSA reads `Q`, and Z moves toward the most desirable
    /// successor.
    pub fn greedy_action(&self, world: &GridWorld, s: usize, gamma: f64) -> usize {
        let scores: Vec<f64> = match self.algorithm {
            Algorithm::Td0 => {
                let model = self.model.as_ref().expect("TD(0) learners keep a model");
                (0..ACTIONS.len())
                    .map(|a| {
                        model
                            .lookahead(s, a, &self.plain, gamma)
                            .unwrap_or(f64::NEG_INFINITY)
                    })
                    .collect()
            }
            Algorithm::Sarsa => self.plain[s * self.width..(s + 1) * self.width].to_vec(),
            Algorithm::Z => (0..ACTIONS.len())
                .map(|a| self.plain[world.mdp().transitions(s, a)[0].next])
                .collect(),
        };
        argmax(&scores)
    }
}

fn per_state(table: &[f64], width: usize) -> Vec<f64> {
    table
        .chunks(width)
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// Path of the greedy policy from the start cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rollout {
    pub states: Vec<usize>,
    pub reached_goal: bool,
    pub hit_trap: bool,
}

pub fn greedy_rollout(state: &LearnerState, world: &GridWorld, gamma: f64) -> Rollout {
    let mut s = world.start();
    let mut states = vec![s];
    for _ in 0..world.config().max_steps {
        if world.is_terminal(s) {
            break;
        }
        let a = state.greedy_action(world, s, gamma);
        s = world.mdp().transitions(s, a)[0].next;
        states.push(s);
    }
    Rollout {
        reached_goal: s == world.goal(),
        hit_trap: states.iter().any(|&x| world.is_trap(x)),
        states,
    }
}

/// Settings of one learning run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub hyper: Hyperparams,
    pub episodes: usize,
    pub seed: u64,
    /// Stops the run after this many updates.
    pub max_updates: Option<usize>,
}

impl LearnerConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            hyper: Hyperparams::default(),
            episodes: DEFAULT_EPISODES,
            seed: 0,
            max_updates: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.hyper;
        if !(0.0..1.0).contains(&h.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1)", h.gamma)));
        }
        if !(h.lr_constant > 0.0 && h.lr_constant.is_finite()) {
            return Err(Error::Config(format!(
                "learning-rate constant {} must be positive",
                h.lr_constant
            )));
        }
        if !(h.max_cost > 0.0 && h.max_cost.is_finite()) {
            return Err(Error::Config(format!(
                "cost limit {} must be positive",
                h.max_cost
            )));
        }
        if h.taylor_degree == 0 || h.taylor_degree > MAX_DEGREE as usize {
            return Err(Error::Config(format!(
                "Taylor degree {} outside 1..={MAX_DEGREE}",
                h.taylor_degree
            )));
        }
        Ok(())
    }
}

/// Runs episodes from the start cell. TD(0) explores ε-greedily over a
/// one-step lookahead on its running model estimate, SARSA ε-greedily
/// over `Q`, and Z-learning follows the passive dynamics. The plaintext
/// table drives every choice, so runs with the same seed consume the
/// same samples whatever the engine.
pub fn run_learning(
    world: &GridWorld,
    cfg: &LearnerConfig,
    mut engine: Option<&mut dyn UpdateEngine>,
) -> Result<LearnerState> {
    cfg.validate()?;
    let hp = &cfg.hyper;
    let mut state = LearnerState::new(cfg.algorithm, world, engine.is_some());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let limit = cfg.max_updates.unwrap_or(usize::MAX);
    let n_actions = ACTIONS.len();

    'episodes: for episode in 0..cfg.episodes {
        let eps = glie_epsilon(episode, cfg.episodes);
        let mut s = world.start();
        let mut a = match cfg.algorithm {
            Algorithm::Sarsa => glie_action(
                &state.plain[s * n_actions..(s + 1) * n_actions],
                eps,
                &mut rng,
            ),
            _ => 0,
        };
        for step in 0..world.config().max_steps {
            if world.is_terminal(s) {
                break;
            }
            if state.updates() >= limit {
                break 'episodes;
            }
            let mut h = match cfg.algorithm {
                Algorithm::Td0 => {
                    let model = state.model.as_ref().expect("TD(0) learners keep a model");
                    let row: Vec<f64> = (0..n_actions)
                        .map(|a| model.lookahead(s, a, &state.plain, hp.gamma).unwrap_or(0.0))
                        .collect();
                    let a = glie_action(&row, eps, &mut rng);
                    world.step(s, a, &mut rng)?
                }
                Algorithm::Sarsa => world.step(s, a, &mut rng)?,
                Algorithm::Z => world.passive_step(s, &mut rng)?,
            };
            h.episode = episode;
            h.step = step;
            match cfg.algorithm {
                Algorithm::Td0 => state.td0_update(&h, hp, engine.as_deref_mut())?,
                Algorithm::Sarsa => {
                    let next = h.next;
                    let a_next = if world.is_terminal(next) {
                        0
                    } else {
                        glie_action(
                            &state.plain[next * n_actions..(next + 1) * n_actions],
                            eps,
                            &mut rng,
                        )
                    };
                    state.sarsa_update(&h, a_next, hp, engine.as_deref_mut())?;
                    a = a_next;
                }
                Algorithm::Z => state.z_update(&h, hp, engine.as_deref_mut())?,
            }
            s = h.next;
        }
        state.episodes += 1;
    }
    Ok(state)
}
