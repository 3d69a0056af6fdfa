use crate::mdp::Mdp;
use crate::{Error, Result};

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
/// `a` is row-major `n x n`.
pub fn solve_linear(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            actual: a.len(),
        });
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .expect("non-empty range");
        if a[pivot * n + col].abs() < 1e-300 {
            return Err(Error::InvalidMdp("singular linear system".into()));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row * n + row];
    }
    Ok(x)
}

/// Values of a fixed policy: the solution of `(I - γ P_π) V = R_π`, with
/// terminal states held at zero.
pub fn policy_values(m: &Mdp, policy: &[usize]) -> Result<Vec<f64>> {
    let n = m.n_states();
    if policy.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: policy.len(),
        });
    }
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for s in 0..n {
        a[s * n + s] = 1.0;
        if m.is_terminal(s) {
            continue;
        }
        for t in m.transitions(s, policy[s]) {
            a[s * n + t.next] -= m.gamma() * t.prob;
            b[s] += t.prob * t.reward;
        }
    }
    solve_linear(a, b)
}
