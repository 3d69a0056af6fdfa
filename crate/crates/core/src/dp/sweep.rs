/// Sweep points of an update sequence: `k_0 = 0` and `k_{n+1}` is the
/// first step by which every required state has been updated since
/// `k_n`. `m` is the longest such sweep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepTracker {
    pub k: Vec<usize>,
    pub m: usize,
}

impl SweepTracker {
    /// Number of completed sweeps.
    pub fn sweeps(&self) -> usize {
        self.k.len() - 1
    }
}

/// Steps are numbered from 1; `updates[t - 1]` is the state updated at
/// step `t`. States outside `required` are ignored.
pub fn sweep_track(updates: &[usize], required: &[usize]) -> SweepTracker {
    let size = updates
        .iter()
        .chain(required)
        .copied()
        .max()
        .map_or(0, |x| x + 1);
    let mut needed = vec![false; size];
    for &s in required {
        needed[s] = true;
    }
    let total = required.iter().filter(|&&s| needed[s]).count();
    let mut k = vec![0];
    let mut seen = vec![false; size];
    let mut count = 0;
    for (i, &s) in updates.iter().enumerate() {
        if needed[s] && !seen[s] {
            seen[s] = true;
            count += 1;
        }
        if count == total && total > 0 {
            k.push(i + 1);
            seen.iter_mut().for_each(|x| *x = false);
            count = 0;
        }
    }
    let m = k.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
    SweepTracker { k, m }
}
