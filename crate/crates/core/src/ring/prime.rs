//! NTT-friendly prime search.

use super::modulus::Modulus;

/// Deterministic Miller-Rabin for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    let m = WideMod(n);
    'outer: for &a in &BASES {
        let mut x = m.pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = m.mul(x, x);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Plain u128 arithmetic for moduli outside the Barrett range.
struct WideMod(u64);

impl WideMod {
    fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.0 as u128) as u64
    }

    fn pow(&self, mut b: u64, mut e: u64) -> u64 {
        let mut acc = 1u64;
        b %= self.0;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        acc
    }
}

/// Which side of `2^bits` a search walks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchDirection {
    /// Strictly below `2^bits`, nearest first.
    Below,
    /// Nearest to `2^bits` on either side, alternating.
    Nearest,
}

/// Finds `count` distinct primes `p ≡ 1 (mod 2n)` near `2^bits`, skipping any
/// in `exclude`. The walk starts at `2^bits + 1` so results are reproducible.
pub fn find_ntt_primes(
    bits: u32,
    degree: usize,
    count: usize,
    direction: SearchDirection,
    exclude: &[u64],
) -> Vec<u64> {
    assert!((10..=super::modulus::MAX_MODULUS_BITS).contains(&bits));
    let step = 2 * degree as u64;
    let center = 1u64 << bits;
    let mut found = Vec::with_capacity(count);
    let mut k: u64 = 0;
    while found.len() < count {
        k += 1;
        let below = center.checked_sub(k * step).map(|c| c + 1);
        let above = center + k * step + 1;
        let mut candidates = Vec::with_capacity(2);
        if let Some(b) = below {
            candidates.push(b);
        }
        if direction == SearchDirection::Nearest
            && 64 - above.leading_zeros() <= super::modulus::MAX_MODULUS_BITS
        {
            candidates.push(above);
        }
        if candidates.is_empty() {
            panic!("prime search for {bits}-bit primes exhausted");
        }
        for c in candidates {
            if found.len() < count && !exclude.contains(&c) && !found.contains(&c) && is_prime(c) {
                found.push(c);
            }
        }
    }
    found
}

/// A primitive `2n`-th root of unity modulo `q`, chosen deterministically
/// as the smallest such root reachable from generators 2, 3, 4, ...
pub fn primitive_root_2n(q: u64, degree: usize) -> u64 {
    let m = Modulus::new(q);
    let order = 2 * degree as u64;
    assert_eq!((q - 1) % order, 0, "q is not 1 mod 2n");
    let mut best: Option<u64> = None;
    for g in 2..q.min(1000) {
        let candidate = m.pow(g, (q - 1) / order);
        if m.pow(candidate, degree as u64) == q - 1 {
            // The smallest among all primitive roots: walk the odd powers.
            let sq = m.mul(candidate, candidate);
            let mut cur = candidate;
            let mut min = candidate;
            for _ in 0..degree {
                min = min.min(cur);
                cur = m.mul(cur, sq);
            }
            best = Some(min);
            break;
        }
    }
    best.expect("no primitive root found")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn miller_rabin_small_and_large() {
        let small: Vec<u64> = (0..60).filter(|&n| is_prime(n)).collect();
        assert_eq!(
            small,
            vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]
        );
        assert!(is_prime(1_152_921_504_606_748_673));
        assert!(!is_prime(1_152_921_504_606_748_675));
        // Carmichael number
        assert!(!is_prime(561));
    }

    #[test]
    fn primes_are_ntt_friendly_and_distinct() {
        let ps = find_ntt_primes(40, 4096, 4, SearchDirection::Nearest, &[]);
        assert_eq!(ps.len(), 4);
        for &p in &ps {
            assert!(is_prime(p));
            assert_eq!(p % 8192, 1);
            assert!(((p as f64).log2() - 40.0).abs() < 1e-3);
        }
        let below = find_ntt_primes(60, 4096, 2, SearchDirection::Below, &[]);
        assert!(below.iter().all(|&p| p < (1 << 60)));
    }

    #[test]
    fn root_has_exact_order() {
        let q = find_ntt_primes(30, 16, 1, SearchDirection::Below, &[])[0];
        let m = Modulus::new(q);
        let psi = primitive_root_2n(q, 16);
        assert_eq!(m.pow(psi, 16), q - 1);
        assert_eq!(m.pow(psi, 32), 1);
    }
}
