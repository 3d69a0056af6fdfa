//! Bellman backups, exact and noisy value iteration, and checks of the
//! noisy-iteration error bounds.

mod bounds;
mod linear;
mod sweep;

use crate::hebackend::NoiseModel;
use rand::Rng;

use crate::mdp::{argmax, glie_action, Mdp};
use crate::{Error, Result};

pub use bounds::{check_async_bound, check_sync_bound, max_gap, BoundReport, REFERENCE_TOLERANCE};
pub use linear::{policy_values, solve_linear};
pub use sweep::{sweep_track, SweepTracker};

/// Q-values, row-major by state.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.values.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, x: f64) {
        self.values[s * self.n_actions + a] = x;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `max_a Q(s, a)` per state.
    pub fn max_values(&self) -> Vec<f64> {
        (0..self.n_states())
            .map(|s| self.row(s)[argmax(self.row(s))])
            .collect()
    }

    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.n_states()).map(|s| argmax(self.row(s))).collect()
    }
}

fn check_len(m: &Mdp, v: &[f64]) -> Result<()> {
    if v.len() != m.n_states() {
        return Err(Error::DimensionMismatch {
            expected: m.n_states(),
            actual: v.len(),
        });
    }
    Ok(())
}

fn q_value(m: &Mdp, v: &[f64], s: usize, a: usize) -> f64 {
    let g = m.gamma();
    m.transitions(s, a)
        .iter()
        .map(|t| t.prob * (t.reward + g * v[t.next]))
        .sum()
}

/// `Q(s,a) = Σ_{s'} P(s'|s,a) [R(s,a,s') + γ V(s')]`.
pub fn q_backup(m: &Mdp, v: &[f64]) -> Result<QTable> {
    check_len(m, v)?;
    let mut q = QTable::zeros(m.n_states(), m.n_actions());
    for s in 0..m.n_states() {
        for a in 0..m.n_actions() {
            q.set(s, a, q_value(m, v, s, a));
        }
    }
    Ok(q)
}

/// `(TV)(s) = max_a Q(s, a)`, with terminal states held at zero.
pub fn bellman_backup(m: &Mdp, v: &[f64]) -> Result<Vec<f64>> {
    let q = q_backup(m, v)?;
    Ok(pin_terminal(m, q.max_values()))
}

fn pin_terminal(m: &Mdp, mut v: Vec<f64>) -> Vec<f64> {
    for (s, x) in v.iter_mut().enumerate() {
        if m.is_terminal(s) {
            *x = 0.0;
        }
    }
    v
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Iterates `T` until successive iterates differ by at most `tol`.
pub fn vi_sync(m: &Mdp, v0: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidMdp(format!(
            "tolerance {tol} must be positive"
        )));
    }
    check_len(m, v0)?;
    let mut v = pin_terminal(m, v0.to_vec());
    let mut residual = f64::INFINITY;
    for k in 1..=max_iter {
        let next = bellman_backup(m, &v)?;
        residual = max_abs_diff(&next, &v);
        v = next;
        if residual <= tol {
            return Ok((v, k));
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Fixed point at the reference tolerance.
pub fn optimal_values(m: &Mdp) -> Result<Vec<f64>> {
    let iters =
        ((REFERENCE_TOLERANCE * (1.0 - m.gamma())).ln() / m.gamma().max(1e-3).ln()).ceil() as usize;
    Ok(vi_sync(
        m,
        &vec![0.0; m.n_states()],
        REFERENCE_TOLERANCE,
        iters.max(100) * 2,
    )?
    .0)
}

/// `iters` noisy synchronous sweeps: every `Q(s, a)` is perturbed before
/// the max. Returns `V_0, ..., V_iters`.
pub fn vi_sync_noisy(
    m: &Mdp,
    v0: &[f64],
    noise: &mut NoiseModel,
    iters: usize,
) -> Result<Vec<Vec<f64>>> {
    check_len(m, v0)?;
    let mut traj = Vec::with_capacity(iters + 1);
    traj.push(pin_terminal(m, v0.to_vec()));
    for _ in 0..iters {
        let v = traj.last().expect("non-empty");
        let next = (0..m.n_states())
            .map(|s| {
                if m.is_terminal(s) {
                    return 0.0;
                }
                (0..m.n_actions())
                    .map(|a| noise.perturb(q_value(m, v, s, a)))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        traj.push(next);
    }
    Ok(traj)
}

fn check_starvation(m: &Mdp, order: &[usize], horizon: Option<usize>) -> Result<()> {
    let Some(horizon) = horizon else {
        return Ok(());
    };
    let mut last = vec![0usize; m.n_states()];
    for (t, &s) in order.iter().enumerate() {
        let t = t + 1;
        last[s] = t;
        for (state, &seen) in last.iter().enumerate() {
            if !m.is_terminal(state) && t - seen > horizon {
                return Err(Error::AssumptionViolation { state, horizon });
            }
        }
    }
    Ok(())
}

fn vi_async_inner(
    m: &Mdp,
    v0: &[f64],
    order: &[usize],
    horizon: Option<usize>,
    mut noise: Option<&mut NoiseModel>,
) -> Result<Vec<Vec<f64>>> {
    check_len(m, v0)?;
    if let Some(&bad) = order.iter().find(|&&s| s >= m.n_states()) {
        return Err(Error::InvalidMdp(format!("state {bad} out of range")));
    }
    check_starvation(m, order, horizon)?;
    let mut v = pin_terminal(m, v0.to_vec());
    let mut traj = Vec::with_capacity(order.len() + 1);
    traj.push(v.clone());
    for &s in order {
        if !m.is_terminal(s) {
            v[s] = (0..m.n_actions())
                .map(|a| {
                    let q = q_value(m, &v, s, a);
                    match noise.as_deref_mut() {
                        Some(n) => n.perturb(q),
                        None => q,
                    }
                })
                .fold(f64::NEG_INFINITY, f64::max);
        }
        traj.push(v.clone());
    }
    Ok(traj)
}

/// In-place updates of one state per step, in `order`. Returns the value
/// vector after each update, starting with `V_0`. With a `horizon`, any
/// non-terminal state left unvisited for longer is rejected.
pub fn vi_async(
    m: &Mdp,
    v0: &[f64],
    order: &[usize],
    horizon: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    vi_async_inner(m, v0, order, horizon, None)
}

pub fn vi_async_noisy(
    m: &Mdp,
    v0: &[f64],
    noise: &mut NoiseModel,
    order: &[usize],
    horizon: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    vi_async_inner(m, v0, order, horizon, Some(noise))
}

/// States updated by an ε-greedy agent acting on one-step lookahead of
/// `v`: each visited non-terminal state is one update. Episodes restart
/// from `start` on reaching a terminal state or after `max_steps`.
pub fn exploration_order<R: Rng + ?Sized>(
    m: &Mdp,
    start: usize,
    v: &[f64],
    eps: f64,
    len: usize,
    max_steps: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_len(m, v)?;
    if m.is_terminal(start) {
        return Err(Error::TerminalState(start));
    }
    let mut order = Vec::with_capacity(len);
    let mut s = start;
    let mut steps = 0;
    while order.len() < len {
        order.push(s);
        let row: Vec<f64> = (0..m.n_actions()).map(|a| q_value(m, v, s, a)).collect();
        let a = glie_action(&row, eps, rng);
        s = m.step(s, a, rng)?.next;
        steps += 1;
        if m.is_terminal(s) || steps >= max_steps {
            s = start;
            steps = 0;
        }
    }
    Ok(order)
}

/// Non-terminal states cycled `sweeps` times.
pub fn round_robin_order(m: &Mdp, sweeps: usize) -> Vec<usize> {
    let states: Vec<usize> = (0..m.n_states()).filter(|&s| !m.is_terminal(s)).collect();
    (0..sweeps).flat_map(|_| states.iter().copied()).collect()
}
