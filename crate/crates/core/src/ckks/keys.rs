use std::sync::Arc;

use rand::Rng;

use super::params::CkksContext;
use crate::ring::{gaussian_coeffs, ternary_coeffs, Modulus, Representation, RingElement};

/// Residues of one polynomial modulo every chain prime and the special
/// prime, prime-major, in NTT form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct ExtendedPoly {
    pub data: Vec<u64>,
}

impl ExtendedPoly {
    fn from_signed(ctx: &CkksContext, coeffs: &[i64]) -> Self {
        let n = ctx.degree();
        let primes = ctx.special_index() + 1;
        let mut data = Vec::with_capacity(primes * n);
        for i in 0..primes {
            let table = ctx.ring().table(i);
            let m = table.modulus();
            let start = data.len();
            data.extend(coeffs.iter().map(|&c| m.reduce_i64(c)));
            table.forward(&mut data[start..]);
        }
        Self { data }
    }

    fn uniform<R: Rng + ?Sized>(ctx: &CkksContext, rng: &mut R) -> Self {
        let n = ctx.degree();
        let primes = ctx.special_index() + 1;
        let mut data = Vec::with_capacity(primes * n);
        for i in 0..primes {
            let q = ctx.ring().modulus(i).value();
            data.extend((0..n).map(|_| rng.gen_range(0..q)));
        }
        Self { data }
    }

    pub fn residues(&self, i: usize, n: usize) -> &[u64] {
        &self.data[i * n..(i + 1) * n]
    }

    fn zip_map(
        &self,
        other: &Self,
        ctx: &CkksContext,
        f: impl Fn(&Modulus, u64, u64) -> u64,
    ) -> Self {
        let n = ctx.degree();
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .enumerate()
            .map(|(k, (&a, &b))| f(ctx.ring().modulus(k / n), a, b))
            .collect();
        Self { data }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretKey {
    coeffs: Vec<i64>,
    ntt: ExtendedPoly,
}

impl SecretKey {
    /// Ternary coefficients of `s`.
    pub fn coefficients(&self) -> &[i64] {
        &self.coeffs
    }

    /// `s` at `level`, in NTT form.
    pub fn at_level(&self, ctx: &CkksContext, level: usize) -> RingElement {
        let n = ctx.degree();
        RingElement::from_raw_unchecked(
            ctx.ring(),
            level,
            Representation::Ntt,
            self.ntt.data[..(level + 1) * n].to_vec(),
        )
    }
}

/// `(b, a) = (-a s + e, a)` at the top level, NTT form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    pub(crate) b: RingElement,
    pub(crate) a: RingElement,
}

impl PublicKey {
    pub fn b(&self) -> &RingElement {
        &self.b
    }

    pub fn a(&self) -> &RingElement {
        &self.a
    }
}

/// Relinearization key: one pair per chain prime. Digit `i` satisfies
/// `b_i + a_i s = e_i + [i == j] P s^2` modulo each prime `q_j`, and
/// `b_i + a_i s = e_i` modulo the special prime `P`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvaluationKey {
    pub(crate) digits: Vec<(ExtendedPoly, ExtendedPoly)>,
}

impl EvaluationKey {
    pub fn digit_count(&self) -> usize {
        self.digits.len()
    }

    /// Flat residues of digit `i` as `(b, a)`.
    pub fn digit(&self, i: usize) -> (&[u64], &[u64]) {
        let (b, a) = &self.digits[i];
        (&b.data, &a.data)
    }

    pub(crate) fn from_raw(digits: Vec<(Vec<u64>, Vec<u64>)>) -> Self {
        Self {
            digits: digits
                .into_iter()
                .map(|(b, a)| (ExtendedPoly { data: b }, ExtendedPoly { data: a }))
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct KeySet {
    pub secret: SecretKey,
    pub public: PublicKey,
    pub evaluation: Arc<EvaluationKey>,
}

impl CkksContext {
    /// Samples a ternary secret, a public key and a relinearization key.
    /// The result depends only on the parameters and the generator state.
    pub fn keygen<R: Rng + ?Sized>(&self, rng: &mut R) -> KeySet {
        let n = self.degree();
        let top = self.max_level();
        let coeffs = ternary_coeffs(n, rng);
        let s = ExtendedPoly::from_signed(self, &coeffs);
        let secret = SecretKey {
            coeffs,
            ntt: s.clone(),
        };

        let s_top = secret.at_level(self, top);
        let a = crate::ring::uniform(self.ring(), top, Representation::Ntt, rng);
        let e =
            RingElement::from_signed(self.ring(), top, &gaussian_coeffs(n, self.gaussian(), rng))
                .to_ntt();
        let b = e
            .sub(&a.mul(&s_top).expect("same level"))
            .expect("same level");
        let public = PublicKey { b, a };

        let s2 = s.zip_map(&s, self, |m, x, y| m.mul(x, y));
        let digits = (0..=top)
            .map(|i| {
                let a = ExtendedPoly::uniform(self, rng);
                let e = ExtendedPoly::from_signed(self, &gaussian_coeffs(n, self.gaussian(), rng));
                let mut b = e.zip_map(
                    &a.zip_map(&s, self, |m, x, y| m.mul(x, y)),
                    self,
                    |m, x, y| m.sub(x, y),
                );
                let m = self.ring().modulus(i);
                let p = self.special_mod(i);
                let block = &mut b.data[i * n..(i + 1) * n];
                for (x, &s2x) in block.iter_mut().zip(s2.residues(i, n)) {
                    *x = m.add(*x, m.mul(p, s2x));
                }
                (b, a)
            })
            .collect();

        KeySet {
            secret,
            public,
            evaluation: Arc::new(EvaluationKey { digits }),
        }
    }
}
