//! Word-sized modular arithmetic for primes below 2^62.

/// Largest supported modulus bit length. Keeping two spare bits lets lazy
/// butterflies hold values in `[0, 4q)` without overflow.
pub const MAX_MODULUS_BITS: u32 = 62;

/// A prime modulus with precomputed Barrett constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Modulus {
    value: u64,
    bits: u32,
    // floor(2^(2*bits) / q)
    barrett: u64,
    // 2^64 mod q
    wide: u64,
}

impl Modulus {
    pub fn new(value: u64) -> Self {
        assert!(value > 1, "modulus must be > 1");
        let bits = 64 - value.leading_zeros();
        assert!(
            bits <= MAX_MODULUS_BITS,
            "modulus wider than {MAX_MODULUS_BITS} bits"
        );
        let barrett = ((1u128 << (2 * bits)) / value as u128) as u64;
        let wide = ((1u128 << 64) % value as u128) as u64;
        Self {
            value,
            bits,
            barrett,
            wide,
        }
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    #[inline]
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Reduces a product `x < q^2`.
    #[inline]
    pub fn reduce_product(&self, x: u128) -> u64 {
        let shifted = (x >> (self.bits - 1)) as u64;
        let qhat = ((shifted as u128 * self.barrett as u128) >> (self.bits + 1)) as u64;
        // the quotient estimate is short by at most 2
        let r = (x as u64).wrapping_sub(qhat.wrapping_mul(self.value));
        let r = r.min(r.wrapping_sub(self.value));
        r.min(r.wrapping_sub(self.value))
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        if x < self.value {
            x
        } else if self.bits > 32 {
            // x < 2^64 <= q^2, within the Barrett range
            self.reduce_product(x as u128)
        } else {
            x % self.value
        }
    }

    /// Reduces any 128-bit value.
    #[inline]
    pub fn reduce_wide(&self, x: u128) -> u64 {
        let hi = self.reduce((x >> 64) as u64);
        let lo = self.reduce(x as u64);
        self.add(self.mul(hi, self.wide), lo)
    }

    /// Maps a signed integer to its residue in `[0, q)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        let r = self.reduce(x.unsigned_abs());
        if x < 0 && r != 0 {
            self.value - r
        } else {
            r
        }
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        s.min(s.wrapping_sub(self.value))
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        let d = a.wrapping_sub(b);
        d.min(d.wrapping_add(self.value))
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_product(a as u128 * b as u128)
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.value;
        base = self.reduce(base);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat; the modulus must be prime.
    pub fn inv(&self, a: u64) -> Option<u64> {
        let a = self.reduce(a);
        if a == 0 {
            None
        } else {
            Some(self.pow(a, self.value - 2))
        }
    }

    /// Shoup precomputation `floor(w * 2^64 / q)` for a fixed multiplicand.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.value as u128) as u64
    }

    /// `a * w mod q` given `w_shoup = self.shoup(w)`; result in `[0, q)`.
    #[inline]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let r = self.mul_shoup_lazy(a, w, w_shoup);
        r.min(r.wrapping_sub(self.value))
    }

    /// Same as [`Modulus::mul_shoup`] but leaves the result in `[0, 2q)`.
    #[inline]
    pub fn mul_shoup_lazy(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let hi = ((a as u128 * w_shoup as u128) >> 64) as u64;
        a.wrapping_mul(w).wrapping_sub(hi.wrapping_mul(self.value))
    }

    /// Centered representative of `a` in `(-q/2, q/2]`.
    #[inline]
    pub fn center(&self, a: u64) -> i64 {
        if a > self.value / 2 {
            -((self.value - a) as i64)
        } else {
            a as i64
        }
    }

    /// Reduces the centered lift of `a mod self` into `other`.
    #[inline]
    pub fn lift_centered(&self, a: u64, other: &Modulus) -> u64 {
        if a > self.value / 2 {
            other.neg(other.reduce(self.value - a))
        } else {
            other.reduce(a)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const Q: u64 = 1_152_921_504_606_748_673; // 2^60 - 2^14 + 1

    #[test]
    fn barrett_matches_u128_remainder() {
        let m = Modulus::new(Q);
        for &(a, b) in &[(0, 5), (Q - 1, Q - 1), (12345, Q - 2), (1 << 59, 3)] {
            assert_eq!(m.mul(a, b), ((a as u128 * b as u128) % Q as u128) as u64);
        }
    }

    #[test]
    fn inverse_and_center() {
        let m = Modulus::new(97);
        for a in 1..97 {
            assert_eq!(m.mul(a, m.inv(a).unwrap()), 1);
        }
        assert_eq!(m.inv(0), None);
        assert_eq!(m.center(96), -1);
        assert_eq!(m.center(48), 48);
        assert_eq!(m.reduce_i64(-3), 94);
    }

    proptest! {
        #[test]
        fn wide_reduction_matches(x in any::<u128>(), bits in 2u32..=62) {
            let q = ((1u64 << (bits - 1)) | 1).max(3);
            let m = Modulus::new(q);
            prop_assert_eq!(m.reduce_wide(x) as u128, x % q as u128);
            prop_assert_eq!(m.reduce(x as u64), (x as u64) % q);
            prop_assert_eq!(m.reduce_i64(x as i64), (x as i64).rem_euclid(q as i64) as u64);
        }

        #[test]
        fn mul_variants_agree(a in 0..Q, b in 0..Q, bits in 2u32..=62) {
            let q = ((1u64 << (bits - 1)) | 1).max(3);
            let m = Modulus::new(q);
            let (a, b) = (a % q, b % q);
            let expect = ((a as u128 * b as u128) % q as u128) as u64;
            prop_assert_eq!(m.mul(a, b), expect);
            prop_assert_eq!(m.mul_shoup(a, b, m.shoup(b)), expect);
        }
    }
}
