//! Random ring elements: uniform, ternary and discrete Gaussian.

use std::sync::Arc;

use rand::Rng;

use super::element::{Representation, RingElement};
use super::params::RingContext;
use crate::{Error, Result};

/// Tail cut, in standard deviations, applied by [`DiscreteGaussian`].
pub const TAIL_CUT: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SampleKind {
    Uniform,
    Ternary,
    Gaussian(f64),
}

/// Centered discrete Gaussian `D_{Z,σ}` restricted to `|x| <= ⌈6σ⌉`,
/// sampled by inverting a cumulative table.
#[derive(Clone, Debug)]
pub struct DiscreteGaussian {
    sigma: f64,
    bound: i64,
    cdf: Vec<f64>,
}

impl DiscreteGaussian {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidSigma(sigma));
        }
        let bound = (TAIL_CUT * sigma).ceil() as i64;
        let weights: Vec<f64> = (-bound..=bound)
            .map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(Self { sigma, bound, cdf })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Largest magnitude this sampler can emit.
    pub fn bound(&self) -> i64 {
        self.bound
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.gen();
        let idx = self
            .cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1);
        idx as i64 - self.bound
    }
}

pub fn ternary_coeffs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<i64> {
    (0..n).map(|_| rng.gen_range(-1i64..=1)).collect()
}

pub fn gaussian_coeffs<R: Rng + ?Sized>(n: usize, dg: &DiscreteGaussian, rng: &mut R) -> Vec<i64> {
    (0..n).map(|_| dg.sample(rng)).collect()
}

impl RingElement {
    /// Draws an element at `level` in coefficient form.
    pub fn sample<R: Rng + ?Sized>(
        ctx: &Arc<RingContext>,
        level: usize,
        kind: SampleKind,
        rng: &mut R,
    ) -> Result<Self> {
        let n = ctx.degree();
        match kind {
            SampleKind::Uniform => Ok(uniform(ctx, level, Representation::Coefficient, rng)),
            SampleKind::Ternary => Ok(RingElement::from_signed(
                ctx,
                level,
                &ternary_coeffs(n, rng),
            )),
            SampleKind::Gaussian(sigma) => {
                let dg = DiscreteGaussian::new(sigma)?;
                Ok(RingElement::from_signed(
                    ctx,
                    level,
                    &gaussian_coeffs(n, &dg, rng),
                ))
            }
        }
    }
}

/// Independent uniform residues; uniform modulo `Q` by CRT, and equally
/// uniform in either representation.
pub(crate) fn uniform<R: Rng + ?Sized>(
    ctx: &Arc<RingContext>,
    level: usize,
    repr: Representation,
    rng: &mut R,
) -> RingElement {
    let n = ctx.degree();
    let mut data = Vec::with_capacity((level + 1) * n);
    for i in 0..=level {
        let q = ctx.modulus(i).value();
        data.extend((0..n).map(|_| rng.gen_range(0..q)));
    }
    RingElement::from_raw_unchecked(ctx, level, repr, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::RingParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_rejects_bad_sigma() {
        assert!(DiscreteGaussian::new(0.0).is_err());
        assert!(DiscreteGaussian::new(-1.0).is_err());
        assert!(DiscreteGaussian::new(f64::NAN).is_err());
    }

    #[test]
    fn same_seed_same_element() {
        let ctx = RingContext::new(RingParams::new(16, vec![97, 193], None).unwrap());
        for kind in [
            SampleKind::Uniform,
            SampleKind::Ternary,
            SampleKind::Gaussian(3.2),
        ] {
            let a = RingElement::sample(&ctx, 1, kind, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
            let b = RingElement::sample(&ctx, 1, kind, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn gaussian_moments_and_tail_cut() {
        let sigma = 8.0 / (2.0 * std::f64::consts::PI).sqrt();
        let dg = DiscreteGaussian::new(sigma).unwrap();
        assert_eq!(dg.bound(), 20);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws: Vec<i64> = (0..1_000_000).map(|_| dg.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<i64>() as f64 / draws.len() as f64;
        let var = draws
            .iter()
            .map(|&x| (x as f64 - mean).powi(2))
            .sum::<f64>()
            / draws.len() as f64;
        assert!(mean.abs() < 0.02);
        assert!((var.sqrt() - 3.192).abs() <= 0.02, "std {}", var.sqrt());
        assert!(draws.iter().all(|x| x.abs() <= dg.bound()));
    }

    #[test]
    fn ternary_coefficients_in_range() {
        let ctx = RingContext::new(RingParams::new(16, vec![97], None).unwrap());
        let t = RingElement::sample(
            &ctx,
            0,
            SampleKind::Ternary,
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap();
        assert!(t.centered_q0().iter().all(|c| (-1..=1).contains(c)));
    }
}
