//! Negacyclic number theoretic transform over `Z_q[X]/(X^N + 1)`.
//!
//! Forward transform is Cooley-Tukey with the `ψ` twist merged into the
//! butterflies; inverse is Gentleman-Sande. Both use Harvey's lazy
//! reduction so intermediate values live in `[0, 4q)`. The NTT domain is
//! bit-reversed, which is irrelevant for pointwise products.

use super::modulus::Modulus;
use super::prime::primitive_root_2n;

#[derive(Clone, Debug)]
pub struct NttTable {
    modulus: Modulus,
    degree: usize,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    psi_inv_rev_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
}

fn bit_reverse(x: usize, log_n: u32) -> usize {
    if log_n == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - log_n)
    }
}

impl NttTable {
    pub fn new(modulus: Modulus, degree: usize) -> Self {
        assert!(degree.is_power_of_two() && degree >= 2);
        let q = modulus.value();
        let log_n = degree.trailing_zeros();
        let psi = primitive_root_2n(q, degree);
        let psi_inv = modulus.inv(psi).expect("root is invertible");
        let mut psi_rev = vec![0u64; degree];
        let mut psi_inv_rev = vec![0u64; degree];
        let (mut p, mut pi) = (1u64, 1u64);
        for i in 0..degree {
            let r = bit_reverse(i, log_n);
            psi_rev[r] = p;
            psi_inv_rev[r] = pi;
            p = modulus.mul(p, psi);
            pi = modulus.mul(pi, psi_inv);
        }
        let psi_rev_shoup = psi_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let psi_inv_rev_shoup = psi_inv_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let n_inv = modulus.inv(degree as u64).expect("degree invertible");
        Self {
            modulus,
            degree,
            psi_rev,
            psi_rev_shoup,
            psi_inv_rev,
            psi_inv_rev_shoup,
            n_inv,
            n_inv_shoup: modulus.shoup(n_inv),
        }
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    /// In-place forward transform; input and output fully reduced.
    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.degree);
        let q = self.modulus.value();
        let two_q = 2 * q;
        let n = self.degree;
        let mut t = n;
        let mut m = 1;
        while m < n {
            t >>= 1;
            let roots = self.psi_rev[m..2 * m]
                .iter()
                .zip(&self.psi_rev_shoup[m..2 * m]);
            for (chunk, (&w, &ws)) in a.chunks_exact_mut(2 * t).zip(roots) {
                let (lo, hi) = chunk.split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = (*x).min(x.wrapping_sub(two_q));
                    let v = self.modulus.mul_shoup_lazy(*y, w, ws);
                    *x = u + v;
                    *y = u + two_q - v;
                }
            }
            m <<= 1;
        }
        for x in a.iter_mut() {
            let v = (*x).min(x.wrapping_sub(two_q));
            *x = v.min(v.wrapping_sub(q));
        }
    }

    /// In-place inverse transform; input and output fully reduced.
    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.degree);
        let q = self.modulus.value();
        let two_q = 2 * q;
        let n = self.degree;
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m >> 1;
            let roots = self.psi_inv_rev[h..m]
                .iter()
                .zip(&self.psi_inv_rev_shoup[h..m]);
            for (chunk, (&w, &ws)) in a.chunks_exact_mut(2 * t).zip(roots) {
                let (lo, hi) = chunk.split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = *y;
                    let s = u + v;
                    *x = s.min(s.wrapping_sub(two_q));
                    *y = self.modulus.mul_shoup_lazy(u + two_q - v, w, ws);
                }
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = self.modulus.mul_shoup(*x, self.n_inv, self.n_inv_shoup);
        }
    }
}
