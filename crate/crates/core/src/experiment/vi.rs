use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{protocol_engine, AsyncOrder, BackendChoice, ExperimentConfig};
use crate::dp::{
    check_async_bound, check_sync_bound, exploration_order, optimal_values, round_robin_order,
    sweep_track, vi_async_noisy, vi_sync_noisy, BoundReport, SweepTracker, REFERENCE_TOLERANCE,
};
use crate::hebackend::NoiseModel;
use crate::mdp::{GridWorld, Mdp};
use crate::protocol::Successor;
use crate::tdlearn::{ErrorTrace, ProtocolEngine, TraceEntry};
use crate::Result;

/// A value-iteration run checked against its bound.
#[derive(Clone, Debug)]
pub struct ViOutcome {
    /// `V*` to [`REFERENCE_TOLERANCE`].
    pub reference: Vec<f64>,
    /// `V_0, V_1, ...`: one entry per sweep, or per single-state update.
    pub trajectory: Vec<Vec<f64>>,
    /// States updated, in order; empty for synchronous runs.
    pub order: Vec<usize>,
    /// Largest perturbation of any `Q(s, a)`: the injected `ε`, or the
    /// tracked decryption error bound, and never below the reference
    /// tolerance.
    pub eps: f64,
    pub sweeps: Option<SweepTracker>,
    pub report: BoundReport,
    pub trace: ErrorTrace,
}

impl ViOutcome {
    pub fn last(&self) -> &[f64] {
        self.trajectory.last().expect("trajectory holds V_0")
    }
}

/// One backup row per successor set, merging repeated successors of an
/// action into one probability-weighted reward.
fn successors(m: &Mdp, v: &[f64], s: usize) -> Vec<Successor> {
    let width = m.n_actions();
    let mut out: Vec<(usize, Successor)> = Vec::new();
    for a in 0..width {
        for t in m.transitions(s, a) {
            let i = match out.iter().position(|(next, _)| *next == t.next) {
                Some(i) => i,
                None => {
                    out.push((
                        t.next,
                        Successor {
                            probs: vec![0.0; width],
                            rewards: vec![0.0; width],
                            value: v[t.next],
                        },
                    ));
                    out.len() - 1
                }
            };
            let e = &mut out[i].1;
            let p = e.probs[a] + t.prob;
            if p > 0.0 {
                e.rewards[a] = (e.probs[a] * e.rewards[a] + t.prob * t.reward) / p;
            }
            e.probs[a] = p;
        }
    }
    out.into_iter().map(|(_, s)| s).collect()
}

/// `max_a Q(s, a)` computed under encryption; also returns the error
/// bound of the row.
fn encrypted_update(engine: &mut ProtocolEngine, m: &Mdp, v: &[f64], s: usize) -> Result<(f64, f64)> {
    let d = engine.backup(m.gamma(), &successors(m, v, s))?;
    let best = d.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((best, d.epsilon))
}

fn encrypted_sync(
    engine: &mut ProtocolEngine,
    m: &Mdp,
    iters: usize,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let mut traj = vec![vec![0.0; m.n_states()]];
    let mut eps: f64 = 0.0;
    for _ in 0..iters {
        let v = traj.last().expect("non-empty");
        let mut next = vec![0.0; m.n_states()];
        for (s, x) in next.iter_mut().enumerate() {
            if !m.is_terminal(s) {
                let (best, e) = encrypted_update(engine, m, v, s)?;
                *x = best;
                eps = eps.max(e);
            }
        }
        traj.push(next);
    }
    Ok((traj, eps))
}

fn encrypted_async(
    engine: &mut ProtocolEngine,
    m: &Mdp,
    order: &[usize],
) -> Result<(Vec<Vec<f64>>, f64)> {
    let mut v = vec![0.0; m.n_states()];
    let mut traj = Vec::with_capacity(order.len() + 1);
    traj.push(v.clone());
    let mut eps: f64 = 0.0;
    for &s in order {
        if !m.is_terminal(s) {
            let (best, e) = encrypted_update(engine, m, &v, s)?;
            v[s] = best;
            eps = eps.max(e);
        }
        traj.push(v.clone());
    }
    Ok((traj, eps))
}

fn gaps<'a>(reference: &'a [f64], v: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
    reference.iter().zip(v).map(|(a, b)| (a - b).abs())
}

fn sync_trace(reference: &[f64], traj: &[Vec<f64>], bound: f64) -> ErrorTrace {
    let entries = traj
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, v)| {
            let (state, gap) = gaps(reference, v)
                .enumerate()
                .fold((0, 0.0), |best, (s, g)| if g > best.1 { (s, g) } else { best });
            TraceEntry {
                iteration: k,
                max_error: gap,
                state,
                action: None,
                value: v[state],
                state_error: gap,
                bound,
            }
        })
        .collect();
    ErrorTrace::from_entries(entries)
}

fn async_trace(reference: &[f64], traj: &[Vec<f64>], order: &[usize], bound: f64) -> ErrorTrace {
    let entries = order
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let v = &traj[i + 1];
            TraceEntry {
                iteration: i + 1,
                max_error: gaps(reference, v).fold(0.0, f64::max),
                state: s,
                action: None,
                value: v[s],
                state_error: (reference[s] - v[s]).abs(),
                bound,
            }
        })
        .collect();
    ErrorTrace::from_entries(entries)
}

/// Runs synchronous or asynchronous value iteration from `V_0 = 0` with
/// the configured perturbation and checks the trailing window of the
/// trajectory against `ε / (1 - γ)` (synchronous) or `M ε / (1 - γ)`
/// (asynchronous, `M` the longest sweep).
pub fn run_value_iteration(cfg: &ExperimentConfig, cloud: Option<&str>) -> Result<ViOutcome> {
    let plan = cfg.resolve()?;
    let world = cfg.world()?;
    let m = world.mdp();
    let gamma = m.gamma();
    let reference = optimal_values(m)?;
    let required: Vec<usize> = (0..m.n_states()).filter(|&s| !m.is_terminal(s)).collect();

    let order = if cfg.mode.is_async() {
        match cfg.order {
            AsyncOrder::RoundRobin => round_robin_order(m, cfg.iterations),
            AsyncOrder::Explore => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                exploration_order(
                    m,
                    world.start(),
                    &reference,
                    cfg.explore_eps,
                    cfg.iterations * required.len(),
                    world.config().max_steps,
                    &mut rng,
                )?
            }
        }
    } else {
        Vec::new()
    };

    let v0 = vec![0.0; m.n_states()];
    let (trajectory, injected) = match plan.backend {
        BackendChoice::Exact | BackendChoice::Noise => {
            let eps = if plan.backend == BackendChoice::Noise {
                cfg.eps
            } else {
                0.0
            };
            let mut noise = NoiseModel::new(eps, cfg.noise_mode, plan.key_seed)?;
            let traj = if cfg.mode.is_async() {
                vi_async_noisy(m, &v0, &mut noise, &order, None)?
            } else {
                vi_sync_noisy(m, &v0, &mut noise, cfg.iterations)?
            };
            (traj, eps)
        }
        BackendChoice::Encrypted => {
            let mut engine = protocol_engine(cfg, &plan, cloud)?;
            if cfg.mode.is_async() {
                encrypted_async(&mut engine, m, &order)?
            } else {
                encrypted_sync(&mut engine, m, cfg.iterations)?
            }
        }
    };
    let eps = injected.max(REFERENCE_TOLERANCE);

    let (report, sweeps, trace) = if cfg.mode.is_async() {
        let tracker = sweep_track(&order, &required);
        let report = check_async_bound(&reference, eps, gamma, &trajectory, &tracker)?;
        let trace = async_trace(&reference, &trajectory, &order, report.bound);
        (report, Some(tracker), trace)
    } else {
        let report = check_sync_bound(&reference, eps, gamma, &trajectory)?;
        let trace = sync_trace(&reference, &trajectory, report.bound);
        (report, None, trace)
    };

    Ok(ViOutcome {
        reference,
        trajectory,
        order,
        eps,
        sweeps,
        report,
        trace,
    })
}

/// `state,row,col,value,shadow_value` with `V*` as the value and the
/// last iterate as the shadow.
pub fn write_vi_values_csv<W: Write>(out: W, vi: &ViOutcome, world: &GridWorld) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state", "row", "col", "value", "shadow_value"])?;
    for (s, (v, sh)) in vi.reference.iter().zip(vi.last()).enumerate() {
        let cell = world.cell(s);
        w.write_record([
            (s + 1).to_string(),
            cell.0.to_string(),
            cell.1.to_string(),
            v.to_string(),
            sh.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::q_backup;
    use crate::mdp::Transition;

    #[test]
    fn merged_successors_reproduce_the_backup() {
        let t = |next, prob, reward| Transition { next, prob, reward };
        // action 0 reaches state 1 twice with different rewards
        let m = Mdp::new(
            3,
            2,
            vec![
                vec![t(1, 0.25, 1.0), t(1, 0.25, -3.0), t(2, 0.5, 0.5)],
                vec![t(0, 1.0, 2.0)],
                vec![t(2, 1.0, 0.0)],
                vec![t(0, 0.5, 1.0), t(2, 0.5, 0.0)],
                vec![t(2, 1.0, 0.0)],
                vec![t(2, 1.0, 0.0)],
            ],
            0.5,
            vec![false, false, true],
        )
        .unwrap();
        let v = [0.3, -1.2, 0.0];
        let rows = successors(&m, &v, 0);
        assert_eq!(rows.len(), 3);
        let q = q_backup(&m, &v).unwrap();
        for a in 0..2 {
            let merged: f64 = rows
                .iter()
                .map(|r| r.probs[a] * (r.rewards[a] + 0.5 * r.value))
                .sum();
            assert!((merged - q.get(0, a)).abs() < 1e-15);
        }
        // (0.25 * 1 + 0.25 * -3) / 0.5
        assert_eq!(rows[0].rewards[0], -1.0);
        assert_eq!(rows[0].probs[0], 0.5);
    }
}
