use super::SweepTracker;
use crate::{Error, Result};

/// Tolerance used for reference fixed points.
pub const REFERENCE_TOLERANCE: f64 = 1e-10;

/// Observed trailing-window gap against a theoretical bound.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub observed: f64,
    pub bound: f64,
    pub pass: bool,
    /// Iterates (or sweep points) the maximum was taken over.
    pub window: Vec<usize>,
}

/// `||V* - V||_∞`.
pub fn max_gap(v_star: &[f64], v: &[f64]) -> f64 {
    v_star
        .iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn trailing(points: &[usize]) -> Vec<usize> {
    let keep = points.len().div_ceil(4).max(1);
    points[points.len() - keep..].to_vec()
}

fn report(v_star: &[f64], traj: &[Vec<f64>], window: Vec<usize>, bound: f64) -> BoundReport {
    let observed = window
        .iter()
        .map(|&k| max_gap(v_star, &traj[k]))
        .fold(0.0, f64::max);
    BoundReport {
        observed,
        bound,
        pass: observed <= bound,
        window,
    }
}

/// Synchronous noisy iteration: the last quarter of the iterates should
/// lie within `ε / (1 - γ)` of `V*`.
pub fn check_sync_bound(
    v_star: &[f64],
    eps: f64,
    gamma: f64,
    traj: &[Vec<f64>],
) -> Result<BoundReport> {
    if traj.len() < 5 {
        return Err(Error::InsufficientTrajectory(format!(
            "{} iterates",
            traj.len()
        )));
    }
    let points: Vec<usize> = (1..traj.len()).collect();
    Ok(report(v_star, traj, trailing(&points), eps / (1.0 - gamma)))
}

/// Asynchronous noisy iteration: at the last quarter of the sweep points
/// `k_n`, the gap should be within `M ε / (1 - γ)`.
pub fn check_async_bound(
    v_star: &[f64],
    eps: f64,
    gamma: f64,
    traj: &[Vec<f64>],
    tracker: &SweepTracker,
) -> Result<BoundReport> {
    let points: Vec<usize> = tracker
        .k
        .iter()
        .copied()
        .filter(|&k| k > 0 && k < traj.len())
        .collect();
    if points.len() < 4 {
        return Err(Error::InsufficientTrajectory(format!(
            "{} completed sweeps",
            points.len()
        )));
    }
    Ok(report(
        v_star,
        traj,
        trailing(&points),
        tracker.m as f64 * eps / (1.0 - gamma),
    ))
}
