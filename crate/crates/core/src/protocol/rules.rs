//! Update circuits evaluated by the cloud, written once over
//! [`Arithmetic`].

use crate::hebackend::Arithmetic;
use crate::{Error, Result};

/// Which circuit a request asks for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    Td0,
    Sarsa,
    Z,
    QBackup,
}

impl Rule {
    pub fn tag(self) -> u8 {
        match self {
            Rule::Td0 => 1,
            Rule::Sarsa => 2,
            Rule::Z => 3,
            Rule::QBackup => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(Rule::Td0),
            2 => Ok(Rule::Sarsa),
            3 => Ok(Rule::Z),
            4 => Ok(Rule::QBackup),
            other => Err(Error::Protocol(format!("unknown rule tag {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rule::Td0 => "td0",
            Rule::Sarsa => "sarsa",
            Rule::Z => "z",
            Rule::QBackup => "q-backup",
        }
    }

    /// Multiplicative depth of the circuit; `degree` only matters for Z.
    pub fn depth(self, degree: usize) -> usize {
        match self {
            Rule::Td0 | Rule::Sarsa | Rule::QBackup => 2,
            Rule::Z => taylor_depth(degree).max(1) + 1,
        }
    }
}

/// Plaintext `Σ_{i<=k} x^i / i!` for `x` in `[-limit, 0]`.
pub fn taylor_exp(x: f64, degree: usize, limit: f64) -> Result<f64> {
    if !(x <= 0.0 && x >= -limit) {
        return Err(Error::ApproximationDomain { x, limit });
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..=degree {
        term *= x / i as f64;
        sum += term;
    }
    Ok(sum)
}

/// Lagrange bound `limit^{k+1} / (k+1)!` on `|exp(x) - taylor_exp(x)|`
/// over `[-limit, 0]`.
pub fn taylor_remainder(degree: usize, limit: f64) -> f64 {
    (1..=degree + 1).fold(1.0, |acc, i| acc * limit / i as f64)
}

/// Coefficient of `l^i` in the expansion of `exp(-l)`.
fn exp_neg_coefficient(i: usize) -> f64 {
    let f: f64 = (1..=i).map(|j| j as f64).product();
    if i.is_multiple_of(2) {
        1.0 / f
    } else {
        -1.0 / f
    }
}

// i = a + b with a the largest power of two below i (a = b when i is a
// power of two).
fn split(i: usize) -> (usize, usize) {
    let a = if i.is_power_of_two() {
        i / 2
    } else {
        1 << (usize::BITS - 1 - i.leading_zeros())
    };
    (a, i - a)
}

fn power_depth(i: usize) -> usize {
    if i <= 1 {
        return 0;
    }
    let (a, b) = split(i);
    power_depth(a).max(power_depth(b)) + 1
}

fn term_depth(i: usize) -> usize {
    match i {
        0 | 1 => 0,
        _ => {
            let (a, b) = split(i);
            power_depth(a).max(power_depth(b) + 1) + 1
        }
    }
}

/// Depth of [`exp_neg_circuit`] for a given degree.
pub fn taylor_depth(degree: usize) -> usize {
    (0..=degree).map(term_depth).max().unwrap_or(0)
}

struct Powers<'a, A: Arithmetic> {
    x: &'a A::Value,
    cache: Vec<Option<A::Value>>,
}

impl<'a, A: Arithmetic> Powers<'a, A> {
    fn get(&mut self, ar: &mut A, i: usize) -> Result<A::Value> {
        if i == 1 {
            return Ok(self.x.clone());
        }
        if let Some(v) = &self.cache[i] {
            return Ok(v.clone());
        }
        let (a, b) = split(i);
        let pa = self.get(ar, a)?;
        let pb = self.get(ar, b)?;
        let v = ar.mul(&pa, &pb)?;
        self.cache[i] = Some(v.clone());
        Ok(v)
    }
}

/// `Σ_{i<=k} (-l)^i / i!`. Each term `c_i l^i` is formed as
/// `l^a (c_i l^b)` so the constant rides on the shallower factor, except
/// at powers of two, where scaling `l^i` costs the same depth and no
/// ciphertext product.
pub fn exp_neg_circuit<A: Arithmetic>(ar: &mut A, l: &A::Value, degree: usize) -> Result<A::Value> {
    let mut powers = Powers::<A> {
        x: l,
        cache: vec![None; degree + 1],
    };
    let mut acc: Option<A::Value> = None;
    for i in (1..=degree).rev() {
        let c = exp_neg_coefficient(i);
        let term = if i == 1 {
            ar.neg(l)?
        } else if i.is_power_of_two() {
            let p = powers.get(ar, i)?;
            ar.mul_const(&p, c)?
        } else {
            let (a, b) = split(i);
            let pa = powers.get(ar, a)?;
            let pb = powers.get(ar, b)?;
            let scaled = ar.mul_const(&pb, c)?;
            ar.mul(&pa, &scaled)?
        };
        acc = Some(match acc {
            None => term,
            Some(s) => ar.add(&s, &term)?,
        });
    }
    match acc {
        Some(s) => ar.add_const(&s, 1.0),
        None => {
            let zero = ar.mul_const(l, 0.0)?;
            ar.add_const(&zero, 1.0)
        }
    }
}

/// `v + α r + α γ v' - α v`.
pub fn td_circuit<A: Arithmetic>(
    ar: &mut A,
    v: &A::Value,
    v_next: &A::Value,
    alpha: &A::Value,
    gamma: &A::Value,
    reward: &A::Value,
) -> Result<A::Value> {
    let ag = ar.mul(alpha, gamma)?;
    let agv = ar.mul(&ag, v_next)?;
    let ar_ = ar.mul(alpha, reward)?;
    let av = ar.mul(alpha, v)?;
    let s = ar.add(&agv, &ar_)?;
    let s = ar.add(&s, v)?;
    ar.sub(&s, &av)
}

/// `z + α T(l) z' - α z` with `T` the degree-`k` expansion of `exp(-l)`.
pub fn z_circuit<A: Arithmetic>(
    ar: &mut A,
    z: &A::Value,
    z_next: &A::Value,
    alpha: &A::Value,
    cost: &A::Value,
    degree: usize,
) -> Result<A::Value> {
    let t = exp_neg_circuit(ar, cost, degree)?;
    let az_next = ar.mul(alpha, z_next)?;
    let tz = ar.mul(&t, &az_next)?;
    let az = ar.mul(alpha, z)?;
    let s = ar.add(&tz, z)?;
    ar.sub(&s, &az)
}

/// One term of a backup: `P(s'|.)`, `R(., s')` and `V(s')`.
pub struct BackupTerm<'a, V> {
    pub prob: &'a V,
    pub reward: &'a V,
    pub value: &'a V,
}

/// `Σ_{s'} P(s') (R(s') + γ V(s'))`.
pub fn q_backup_circuit<A: Arithmetic>(
    ar: &mut A,
    gamma: &A::Value,
    terms: &[BackupTerm<'_, A::Value>],
) -> Result<A::Value> {
    let mut acc: Option<A::Value> = None;
    for t in terms {
        let gv = ar.mul(gamma, t.value)?;
        let inner = ar.add(t.reward, &gv)?;
        let term = ar.mul(t.prob, &inner)?;
        acc = Some(match acc {
            None => term,
            Some(s) => ar.add(&s, &term)?,
        });
    }
    acc.ok_or_else(|| Error::Protocol("backup with no successor terms".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hebackend::Backend;

    #[test]
    fn taylor_values() {
        for k in 0..8 {
            assert_eq!(taylor_exp(0.0, k, 1.0).unwrap(), 1.0);
        }
        // independent oracle: sum in reverse order with exact rationals
        let oracle: f64 = [1.0, -0.5, 0.125, -1.0 / 48.0, 1.0 / 384.0]
            .iter()
            .rev()
            .sum();
        let t = taylor_exp(-0.5, 4, 1.0).unwrap();
        assert!((t - oracle).abs() < 1e-15);
        assert!((t - 0.606_770_833_333_333_3).abs() < 1e-15);
        assert!((t - (-0.5f64).exp()).abs() <= 3e-4);
        assert!(matches!(
            taylor_exp(-1.5, 5, 1.0),
            Err(Error::ApproximationDomain { .. })
        ));
        assert!(taylor_exp(0.1, 5, 1.0).is_err());
    }

    #[test]
    fn remainder_bounds_the_error() {
        let r = taylor_remainder(5, 1.0);
        assert!((r - 1.0 / 720.0).abs() < 1e-18);
        for i in 0..=1000 {
            let x = -(i as f64) / 1000.0;
            assert!((taylor_exp(x, 5, 1.0).unwrap() - x.exp()).abs() <= r);
        }
    }

    #[test]
    fn depths() {
        assert_eq!(taylor_depth(1), 0);
        assert_eq!(taylor_depth(2), 2);
        assert_eq!(taylor_depth(3), 2);
        assert_eq!(taylor_depth(5), 3);
        assert_eq!(Rule::Z.depth(5), 4);
        assert_eq!(Rule::Td0.depth(5), 2);
    }

    #[test]
    fn circuits_match_formulas_on_exact_values() {
        let mut b = Backend::exact();
        let mut e = |x: f64| b.encrypt(x).unwrap();
        let (v, vn, a, g, r) = (e(0.0), e(1.0), e(0.5), e(0.9), e(1.0));
        let out = td_circuit(&mut b, &v, &vn, &a, &g, &r).unwrap();
        assert!((b.decrypt(&out).unwrap() - 0.95).abs() < 1e-15);

        for k in [1usize, 2, 3, 4, 5, 6, 7] {
            for &l in &[0.0, 0.3, 1.0] {
                let c = b.encrypt(l).unwrap();
                let t = exp_neg_circuit(&mut b, &c, k).unwrap();
                let want = taylor_exp(-l, k, 1.0).unwrap();
                assert!((b.decrypt(&t).unwrap() - want).abs() < 1e-14, "k={k} l={l}");
            }
        }

        let ln2 = std::f64::consts::LN_2;
        let (z, zn, a1, l) = (
            b.encrypt(1.0).unwrap(),
            b.encrypt(2.0).unwrap(),
            b.encrypt(1.0).unwrap(),
            b.encrypt(ln2).unwrap(),
        );
        let out = z_circuit(&mut b, &z, &zn, &a1, &l, 12).unwrap();
        assert!((b.decrypt(&out).unwrap() - 1.0).abs() < 1e-9);

        let (gm, p1, r1, v1, p2, r2, v2) = (0.9, 0.25, 1.0, 10.0, 0.75, -1.0, 2.0);
        let vals: Vec<_> = [gm, p1, r1, v1, p2, r2, v2]
            .iter()
            .map(|&x| b.encrypt(x).unwrap())
            .collect();
        let terms = [
            BackupTerm {
                prob: &vals[1],
                reward: &vals[2],
                value: &vals[3],
            },
            BackupTerm {
                prob: &vals[4],
                reward: &vals[5],
                value: &vals[6],
            },
        ];
        let q = q_backup_circuit(&mut b, &vals[0], &terms).unwrap();
        let want = p1 * (r1 + gm * v1) + p2 * (r2 + gm * v2);
        assert!((b.decrypt(&q).unwrap() - want).abs() < 1e-12);
    }
}
