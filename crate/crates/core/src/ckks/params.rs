use std::sync::Arc;

use num_bigint::BigUint;

use super::encoding::SpecialFft;
use crate::ring::{DiscreteGaussian, Modulus, RingContext, RingParams};
use crate::{Error, Result};

/// Smallest accepted scale, as a power of two.
pub const MIN_LOG2_SCALE: f64 = 20.0;

/// Default error standard deviation, `8 / sqrt(2π)`.
pub const DEFAULT_SIGMA: f64 = 3.191_538_243_211_461;

/// Ring parameters plus the CKKS scale and error width.
#[derive(Clone, Debug, PartialEq)]
pub struct CkksParams {
    ring: RingParams,
    log2_scale: f64,
    sigma: f64,
}

impl CkksParams {
    /// Key switching needs a special prime at least as large as every
    /// chain prime, so the chain must be built with one.
    pub fn new(ring: RingParams, log2_scale: f64, sigma: f64) -> Result<Self> {
        if !(log2_scale >= MIN_LOG2_SCALE) {
            return Err(Error::ScaleTooSmall(log2_scale));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidSigma(sigma));
        }
        let Some(special) = ring.special() else {
            return Err(Error::InvalidParams(
                "key switching needs a special prime".into(),
            ));
        };
        if ring.chain()[1..].iter().any(|&q| q > special) {
            return Err(Error::InvalidParams(
                "special prime smaller than a rescale prime".into(),
            ));
        }
        if log2_scale + 1.0 >= (ring.chain()[0] as f64).log2() {
            return Err(Error::InvalidParams(
                "base prime leaves no room above the scale".into(),
            ));
        }
        Ok(Self {
            ring,
            log2_scale,
            sigma,
        })
    }

    /// Chain of a `base_bits` prime, `depth` primes of `scale_bits` bits,
    /// and a `special_bits` special prime; scale `2^scale_bits`.
    pub fn generate(
        degree: usize,
        base_bits: u32,
        depth: usize,
        scale_bits: u32,
        special_bits: u32,
    ) -> Result<Self> {
        let ring = RingParams::generate(
            degree,
            base_bits,
            &vec![scale_bits; depth],
            Some(special_bits),
        )?;
        Self::new(ring, scale_bits as f64, DEFAULT_SIGMA)
    }

    pub fn ring(&self) -> &RingParams {
        &self.ring
    }

    pub fn log2_scale(&self) -> f64 {
        self.log2_scale
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn degree(&self) -> usize {
        self.ring.degree()
    }

    pub fn slots(&self) -> usize {
        self.ring.degree() / 2
    }

    /// Number of rescalings the chain supports.
    pub fn depth(&self) -> usize {
        self.ring.max_level()
    }
}

/// Everything derived from [`CkksParams`] once: NTT tables, the FFT used
/// by the encoder, per-level scales and the constants used by rescaling
/// and key switching.
#[derive(Debug)]
pub struct CkksContext {
    params: CkksParams,
    ring: Arc<RingContext>,
    fft: SpecialFft,
    gaussian: DiscreteGaussian,
    level_scales: Vec<f64>,
    // q_l^{-1} mod q_j for j < l, indexed [l][j]
    rescale_inv: Vec<Vec<u64>>,
    // P mod q_j and P^{-1} mod q_j
    special_mod: Vec<u64>,
    special_inv: Vec<u64>,
    // CRT data for levels whose coefficients overflow q_0
    crt: Vec<CrtLevel>,
}

#[derive(Debug)]
pub(crate) struct CrtLevel {
    pub modulus: BigUint,
    pub half: BigUint,
    // (Q/q_i) * ((Q/q_i)^{-1} mod q_i)
    pub basis: Vec<BigUint>,
}

impl CkksContext {
    pub fn new(params: CkksParams) -> Result<Arc<Self>> {
        let ring = RingContext::new(params.ring.clone());
        let n = params.degree();
        let max = params.depth();
        let chain = params.ring.chain();

        let mut level_scales = vec![0.0; max + 1];
        level_scales[max] = params.log2_scale;
        for l in (1..=max).rev() {
            level_scales[l - 1] = 2.0 * level_scales[l] - (chain[l] as f64).log2();
        }
        if let Some((l, s)) = level_scales
            .iter()
            .enumerate()
            .find(|(_, &s)| s < MIN_LOG2_SCALE)
        {
            return Err(Error::InvalidParams(format!(
                "scale at level {l} collapses to 2^{s:.1}"
            )));
        }

        let rescale_inv = (0..=max)
            .map(|l| {
                (0..l)
                    .map(|j| {
                        let m = ring.modulus(j);
                        m.inv(m.reduce(chain[l])).expect("distinct primes")
                    })
                    .collect()
            })
            .collect();
        let p = params.ring.special().expect("checked in CkksParams::new");
        let special_mod: Vec<u64> = (0..=max).map(|j| ring.modulus(j).reduce(p)).collect();
        let special_inv = (0..=max)
            .map(|j| {
                ring.modulus(j)
                    .inv(special_mod[j])
                    .expect("distinct primes")
            })
            .collect();
        let crt = (0..=max).map(|l| CrtLevel::new(&chain[..=l])).collect();

        Ok(Arc::new(Self {
            fft: SpecialFft::new(n),
            gaussian: DiscreteGaussian::new(params.sigma)?,
            params,
            ring,
            level_scales,
            rescale_inv,
            special_mod,
            special_inv,
            crt,
        }))
    }

    pub fn params(&self) -> &CkksParams {
        &self.params
    }

    pub fn ring(&self) -> &Arc<RingContext> {
        &self.ring
    }

    pub fn degree(&self) -> usize {
        self.params.degree()
    }

    pub fn slots(&self) -> usize {
        self.params.slots()
    }

    pub fn max_level(&self) -> usize {
        self.params.depth()
    }

    /// `log2` of the scale a ciphertext carries at `level` when every
    /// multiplication before it was followed by one rescale.
    pub fn level_log2_scale(&self, level: usize) -> f64 {
        self.level_scales[level]
    }

    pub fn modulus(&self, i: usize) -> &Modulus {
        self.ring.modulus(i)
    }

    pub(crate) fn fft(&self) -> &SpecialFft {
        &self.fft
    }

    pub(crate) fn gaussian(&self) -> &DiscreteGaussian {
        &self.gaussian
    }

    pub(crate) fn rescale_inv(&self, level: usize, j: usize) -> u64 {
        self.rescale_inv[level][j]
    }

    pub(crate) fn special_mod(&self, j: usize) -> u64 {
        self.special_mod[j]
    }

    pub(crate) fn special_inv(&self, j: usize) -> u64 {
        self.special_inv[j]
    }

    pub(crate) fn special_index(&self) -> usize {
        self.params.depth() + 1
    }

    pub(crate) fn crt(&self, level: usize) -> &CrtLevel {
        &self.crt[level]
    }
}

impl CrtLevel {
    fn new(primes: &[u64]) -> Self {
        let modulus: BigUint = primes.iter().map(|&q| BigUint::from(q)).product();
        let basis = primes
            .iter()
            .map(|&q| {
                let big_q = BigUint::from(q);
                let hat = &modulus / &big_q;
                let hat_mod = (&hat % &big_q)
                    .to_u64_digits()
                    .first()
                    .copied()
                    .unwrap_or(0);
                let inv = Modulus::new(q).inv(hat_mod).expect("coprime");
                hat * BigUint::from(inv)
            })
            .collect();
        let half = &modulus >> 1u32;
        Self {
            modulus,
            half,
            basis,
        }
    }

    /// Signed value of the residues `r_i`, as a float.
    pub fn reconstruct(&self, residues: impl Iterator<Item = u64>) -> f64 {
        let mut acc = BigUint::default();
        for (r, b) in residues.zip(&self.basis) {
            acc += b * BigUint::from(r);
        }
        acc %= &self.modulus;
        if acc > self.half {
            -big_to_f64(&(&self.modulus - acc))
        } else {
            big_to_f64(&acc)
        }
    }
}

fn big_to_f64(x: &BigUint) -> f64 {
    x.to_u64_digits()
        .iter()
        .rev()
        .fold(0.0, |acc, &d| acc * 18_446_744_073_709_551_616.0 + d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_scales_follow_the_chain() {
        let params = CkksParams::generate(64, 60, 3, 40, 60).unwrap();
        let ctx = CkksContext::new(params).unwrap();
        let chain = ctx.params().ring().chain().to_vec();
        assert_eq!(ctx.level_log2_scale(3), 40.0);
        for l in 1..=3 {
            let expect = 2.0 * ctx.level_log2_scale(l) - (chain[l] as f64).log2();
            assert_eq!(ctx.level_log2_scale(l - 1), expect);
            assert!((ctx.level_log2_scale(l - 1) - 40.0).abs() < 1e-3);
        }
    }

    #[test]
    fn rejects_missing_special_and_small_scale() {
        let ring = RingParams::generate(64, 60, &[40], None).unwrap();
        assert!(CkksParams::new(ring.clone(), 40.0, DEFAULT_SIGMA).is_err());
        let ring = RingParams::generate(64, 60, &[40], Some(60)).unwrap();
        assert!(matches!(
            CkksParams::new(ring.clone(), 19.0, DEFAULT_SIGMA),
            Err(Error::ScaleTooSmall(_))
        ));
        assert!(CkksParams::new(ring, 40.0, 0.0).is_err());
    }

    #[test]
    fn crt_reconstructs_signed_values() {
        let primes = [97u64, 193, 353];
        let crt = CrtLevel::new(&primes);
        for v in [-3_000_000i64, -1, 0, 5, 3_000_000] {
            let res = primes.iter().map(|&q| v.rem_euclid(q as i64) as u64);
            assert_eq!(crt.reconstruct(res), v as f64);
        }
    }
}
