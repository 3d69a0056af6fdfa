//! Canonical-embedding encoder: slot `j` holds `m(ζ^{5^j})` with
//! `ζ = exp(iπ/N)`, for `j < N/2`.

use num_complex::Complex64;

use super::params::{CkksContext, MIN_LOG2_SCALE};
use crate::ring::RingElement;
use crate::{Error, Result};

/// Encoded message: an integer polynomial together with its scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Plaintext {
    poly: RingElement,
    log2_scale: f64,
    message_bound: f64,
    // bound on |coefficient| when it may exceed q_0 / 2
    wide_bound: Option<f64>,
}

impl Plaintext {
    pub fn poly(&self) -> &RingElement {
        &self.poly
    }

    pub fn level(&self) -> usize {
        self.poly.level()
    }

    pub fn log2_scale(&self) -> f64 {
        self.log2_scale
    }

    pub fn scale(&self) -> f64 {
        self.log2_scale.exp2()
    }

    pub fn slots(&self) -> usize {
        self.poly.degree() / 2
    }

    /// Largest slot magnitude the plaintext was built from.
    pub fn message_bound(&self) -> f64 {
        self.message_bound
    }

    pub(crate) fn from_decryption(
        poly: RingElement,
        log2_scale: f64,
        message_bound: f64,
        coeff_bound: f64,
    ) -> Self {
        Self {
            poly,
            log2_scale,
            message_bound,
            wide_bound: Some(coeff_bound),
        }
    }
}

/// Tables for the FFT over the `5^j` orbit of primitive `2N`-th roots.
#[derive(Debug)]
pub(crate) struct SpecialFft {
    slots: usize,
    m: usize,
    rot_group: Vec<usize>,
    ksi_pows: Vec<Complex64>,
}

impl SpecialFft {
    pub fn new(degree: usize) -> Self {
        let m = 2 * degree;
        let slots = degree / 2;
        let mut rot_group = Vec::with_capacity(slots);
        let mut g = 1usize;
        for _ in 0..slots {
            rot_group.push(g);
            g = g * 5 % m;
        }
        let ksi_pows = (0..=m)
            .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / m as f64))
            .collect();
        Self {
            slots,
            m,
            rot_group,
            ksi_pows,
        }
    }

    fn bit_reverse(vals: &mut [Complex64]) {
        let n = vals.len();
        let mut j = 0;
        for i in 1..n {
            let mut bit = n >> 1;
            while j & bit != 0 {
                j ^= bit;
                bit >>= 1;
            }
            j ^= bit;
            if i < j {
                vals.swap(i, j);
            }
        }
    }

    /// Slot values from the packed coefficients `c_i + i c_{i+N/2}`.
    pub fn forward(&self, vals: &mut [Complex64]) {
        let size = self.slots;
        Self::bit_reverse(vals);
        let mut len = 2;
        while len <= size {
            let lenh = len >> 1;
            let lenq = len << 2;
            let gap = self.m / lenq;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (self.rot_group[j] % lenq) * gap;
                    let u = vals[i + j];
                    let v = vals[i + j + lenh] * self.ksi_pows[idx];
                    vals[i + j] = u + v;
                    vals[i + j + lenh] = u - v;
                }
            }
            len <<= 1;
        }
    }

    pub fn inverse(&self, vals: &mut [Complex64]) {
        let size = self.slots;
        let mut len = size;
        while len >= 2 {
            let lenh = len >> 1;
            let lenq = len << 2;
            let gap = self.m / lenq;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (lenq - self.rot_group[j] % lenq) * gap;
                    let u = vals[i + j] + vals[i + j + lenh];
                    let v = (vals[i + j] - vals[i + j + lenh]) * self.ksi_pows[idx];
                    vals[i + j] = u;
                    vals[i + j + lenh] = v;
                }
            }
            len >>= 1;
        }
        Self::bit_reverse(vals);
        let inv = 1.0 / size as f64;
        vals.iter_mut().for_each(|v| *v *= inv);
    }
}

impl CkksContext {
    /// Encodes up to `N/2` reals into a plaintext at `level` and scale
    /// `2^log2_scale`; unused slots are zero.
    pub fn encode(&self, values: &[f64], log2_scale: f64, level: usize) -> Result<Plaintext> {
        let slots = self.slots();
        if values.len() > slots {
            return Err(Error::VectorTooLong {
                len: values.len(),
                slots,
            });
        }
        let message_bound = self.check_encodable(values.iter().copied(), log2_scale, level)?;
        let scale = log2_scale.exp2();
        let mut buf = vec![Complex64::new(0.0, 0.0); slots];
        for (b, &v) in buf.iter_mut().zip(values) {
            b.re = v;
        }
        self.fft().inverse(&mut buf);
        let mut coeffs = vec![0i64; self.degree()];
        for (i, z) in buf.iter().enumerate() {
            coeffs[i] = (z.re * scale).round() as i64;
            coeffs[i + slots] = (z.im * scale).round() as i64;
        }
        Ok(Plaintext {
            poly: RingElement::from_signed(self.ring(), level, &coeffs),
            log2_scale,
            message_bound,
            wide_bound: None,
        })
    }

    /// Places `x` in every slot as the constant polynomial `round(x Δ)`.
    pub fn encode_scalar(&self, x: f64, log2_scale: f64, level: usize) -> Result<Plaintext> {
        let message_bound = self.check_encodable(std::iter::once(x), log2_scale, level)?;
        let mut coeffs = vec![0i64; self.degree()];
        coeffs[0] = (x * log2_scale.exp2()).round() as i64;
        Ok(Plaintext {
            poly: RingElement::from_signed(self.ring(), level, &coeffs),
            log2_scale,
            message_bound,
            wide_bound: None,
        })
    }

    fn check_encodable(
        &self,
        values: impl Iterator<Item = f64>,
        log2_scale: f64,
        level: usize,
    ) -> Result<f64> {
        if !(log2_scale >= MIN_LOG2_SCALE) {
            return Err(Error::ScaleTooSmall(log2_scale));
        }
        if level > self.max_level() {
            return Err(Error::InvalidParams(format!("level {level} beyond chain")));
        }
        let q0 = self.modulus(0).value() as f64;
        let mut max = 0.0f64;
        for v in values {
            if !v.is_finite() {
                return Err(Error::MessageOverflow(v));
            }
            max = max.max(v.abs());
        }
        // Every coefficient is at most the largest slot magnitude times Δ.
        if max * log2_scale.exp2() >= q0 / 2.0 {
            return Err(Error::MessageOverflow(max));
        }
        Ok(max)
    }

    fn signed_coefficients(&self, pt: &Plaintext) -> Vec<f64> {
        let coeff = pt.poly.to_coefficient();
        let half_q0 = self.modulus(0).value() as f64 / 2.0;
        match pt.wide_bound {
            Some(b) if b >= half_q0 => {
                let n = self.degree();
                let crt = self.crt(pt.level());
                (0..n)
                    .map(|k| crt.reconstruct((0..=pt.level()).map(|i| coeff.residues(i)[k])))
                    .collect()
            }
            _ => {
                let m = self.modulus(0);
                coeff
                    .residues(0)
                    .iter()
                    .map(|&x| m.center(x) as f64)
                    .collect()
            }
        }
    }

    /// Real parts of all `N/2` slots.
    pub fn decode(&self, pt: &Plaintext) -> Vec<f64> {
        self.decode_complex(pt).into_iter().map(|z| z.re).collect()
    }

    pub fn decode_complex(&self, pt: &Plaintext) -> Vec<Complex64> {
        let slots = self.slots();
        let c = self.signed_coefficients(pt);
        let inv_scale = (-pt.log2_scale).exp2();
        let mut buf: Vec<Complex64> = (0..slots)
            .map(|i| Complex64::new(c[i] * inv_scale, c[i + slots] * inv_scale))
            .collect();
        self.fft().forward(&mut buf);
        buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ckks::CkksParams;
    use crate::ring::Representation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn ctx(n: usize) -> Arc<CkksContext> {
        CkksContext::new(CkksParams::generate(n, 60, 2, 40, 60).unwrap()).unwrap()
    }

    // Direct evaluation of m(ζ^{5^j}) / Δ.
    fn evaluate_slots(coeffs: &[i64], scale: f64) -> Vec<Complex64> {
        let n = coeffs.len();
        let m = 2 * n;
        let mut g = 1usize;
        let mut out = Vec::new();
        for _ in 0..n / 2 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &c) in coeffs.iter().enumerate() {
                let e = (g * k) % m;
                acc += Complex64::from_polar(c as f64, PI * e as f64 / n as f64);
            }
            out.push(acc / scale);
            g = g * 5 % m;
        }
        out
    }

    #[test]
    fn fast_decode_matches_direct_evaluation() {
        let ctx = ctx(64);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let coeffs: Vec<i64> = (0..64)
            .map(|_| rng.gen_range(-1_000_000..1_000_000))
            .collect();
        let pt = Plaintext {
            poly: RingElement::from_signed(ctx.ring(), 0, &coeffs),
            log2_scale: 20.0,
            message_bound: 0.0,
            wide_bound: None,
        };
        let fast = ctx.decode_complex(&pt);
        let slow = evaluate_slots(&coeffs, 2f64.powi(20));
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn encode_places_values_in_slots() {
        let ctx = ctx(64);
        let values: Vec<f64> = (0..32).map(|i| i as f64 - 15.5).collect();
        let pt = ctx.encode(&values, 30.0, 1).unwrap();
        let coeffs: Vec<i64> = pt.poly().centered_q0();
        let slots = evaluate_slots(&coeffs, 2f64.powi(30));
        for (z, v) in slots.iter().zip(&values) {
            assert!((z.re - v).abs() < 1e-7 && z.im.abs() < 1e-7);
        }
    }

    #[test]
    fn zero_vector_round_trips_exactly() {
        let ctx = ctx(64);
        let pt = ctx.encode(&[0.0; 32], 40.0, 2).unwrap();
        assert!(ctx.decode(&pt).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn round_trip_at_desk_size() {
        let ctx = ctx(4096);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let v: Vec<f64> = (0..2048).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let out = ctx.decode(&ctx.encode(&v, 40.0, 2).unwrap());
            let err = v
                .iter()
                .zip(&out)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-6, "error {err}");
        }
    }

    #[test]
    fn encoding_is_linear() {
        let ctx = ctx(256);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..128).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let v: Vec<f64> = (0..128).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let pu = ctx.encode(&u, 40.0, 2).unwrap();
        let pv = ctx.encode(&v, 40.0, 2).unwrap();
        let single = u
            .iter()
            .zip(ctx.decode(&pu))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            .max(
                v.iter()
                    .zip(ctx.decode(&pv))
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            );
        let sum = Plaintext {
            poly: pu.poly().add(pv.poly()).unwrap(),
            log2_scale: 40.0,
            message_bound: 20.0,
            wide_bound: None,
        };
        let out = ctx.decode(&sum);
        for i in 0..128 {
            // rounding in each encode contributes; 2x the single error plus float slack
            assert!((out[i] - u[i] - v[i]).abs() <= 2.0 * single + 1e-12);
        }
    }

    #[test]
    fn scalar_encoding_fills_every_slot() {
        let ctx = ctx(64);
        let out = ctx.decode(&ctx.encode_scalar(-2.75, 40.0, 2).unwrap());
        assert!(out.iter().all(|&x| (x + 2.75).abs() < 1e-11));
    }

    #[test]
    fn encode_errors() {
        let ctx = ctx(64);
        assert!(matches!(
            ctx.encode(&[0.0; 33], 40.0, 0),
            Err(Error::VectorTooLong { len: 33, slots: 32 })
        ));
        assert!(matches!(
            ctx.encode(&[1.0], 10.0, 0),
            Err(Error::ScaleTooSmall(_))
        ));
        assert!(matches!(
            ctx.encode(&[1e9], 55.0, 0),
            Err(Error::MessageOverflow(_))
        ));
    }

    #[test]
    fn wide_coefficients_decode_through_crt() {
        let ctx = ctx(64);
        // exceeds q_0/2 ~ 2^59
        let big = 3i128 << 61;
        let mut residues = Vec::new();
        for i in 0..=1 {
            let q = ctx.modulus(i).value() as i128;
            let mut r = vec![0u64; 64];
            r[0] = big.rem_euclid(q) as u64;
            residues.extend(r);
        }
        let poly = RingElement::from_residues(ctx.ring(), 1, Representation::Coefficient, residues)
            .unwrap();
        let pt = Plaintext::from_decryption(poly, 60.0, 6.0, 2f64.powi(63));
        let out = ctx.decode(&pt);
        assert!((out[0] - 6.0).abs() < 1e-9);
    }
}
