//! Binary ciphertext format.
//!
//! ```text
//! "ERLC" | version u16 | N u32 | level u32 | log2 scale f64 | prime count u32
//! | primes u64... | c0 residues u64... | c1 residues u64... | p f64 | B f64
//! ```
//! All integers little-endian; residues prime-major.

use std::sync::Arc;

use super::ciphertext::Ciphertext;
use super::params::CkksContext;
use crate::ring::{Representation, RingElement};
use crate::{Error, Result};

pub const CIPHERTEXT_MAGIC: &[u8; 4] = b"ERLC";
pub const CIPHERTEXT_VERSION: u16 = 1;

/// Little-endian cursor over a byte slice.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    pub fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.buf.len() < len {
            return Err(Error::Framing(format!(
                "truncated input: need {len} bytes, have {}",
                self.buf.len()
            )));
        }
        let (head, tail) = self.buf.split_at(len);
        self.buf = tail;
        Ok(head)
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("length checked"),
        ))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("length checked"),
        ))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("length checked"),
        ))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    pub fn u64_vec(&mut self, count: usize) -> Result<Vec<u64>> {
        let bytes = self.take(
            count
                .checked_mul(8)
                .ok_or_else(|| Error::Protocol("length overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }

    pub fn remaining(&self) -> usize {
        self.buf.len()
    }
}

pub(crate) fn put_u64s(out: &mut Vec<u8>, xs: &[u64]) {
    out.reserve(xs.len() * 8);
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

impl Ciphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let ring = self.c0.context();
        let level = self.level();
        let mut out = Vec::with_capacity(40 + 2 * self.c0.raw().len() * 8);
        out.extend_from_slice(CIPHERTEXT_MAGIC);
        out.extend_from_slice(&CIPHERTEXT_VERSION.to_le_bytes());
        out.extend_from_slice(&(ring.degree() as u32).to_le_bytes());
        out.extend_from_slice(&(level as u32).to_le_bytes());
        out.extend_from_slice(&self.log2_scale.to_le_bytes());
        out.extend_from_slice(&((level + 1) as u32).to_le_bytes());
        put_u64s(&mut out, &ring.params().chain()[..=level]);
        put_u64s(&mut out, self.c0.raw());
        put_u64s(&mut out, self.c1.raw());
        out.extend_from_slice(&self.message_bound.to_le_bytes());
        out.extend_from_slice(&self.noise_bound.to_le_bytes());
        out
    }

    /// Parses a ciphertext and checks it against `ctx`.
    pub fn from_bytes(ctx: &Arc<CkksContext>, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let ct = Self::read(ctx, &mut r)?;
        if r.remaining() != 0 {
            return Err(Error::Protocol(format!(
                "{} trailing bytes after ciphertext",
                r.remaining()
            )));
        }
        Ok(ct)
    }

    pub(crate) fn read(ctx: &Arc<CkksContext>, r: &mut Reader<'_>) -> Result<Self> {
        if r.take(4)? != CIPHERTEXT_MAGIC {
            return Err(Error::Protocol("bad ciphertext magic".into()));
        }
        let version = r.u16()?;
        if version != CIPHERTEXT_VERSION {
            return Err(Error::VersionMismatch(version));
        }
        let n = r.u32()? as usize;
        let level = r.u32()? as usize;
        let log2_scale = r.f64()?;
        let count = r.u32()? as usize;
        if n != ctx.degree() || level > ctx.max_level() || count != level + 1 {
            return Err(Error::ParamsMismatch);
        }
        let primes = r.u64_vec(count)?;
        if primes != ctx.params().ring().chain()[..=level] {
            return Err(Error::ParamsMismatch);
        }
        let c0 = RingElement::from_residues(
            ctx.ring(),
            level,
            Representation::Ntt,
            r.u64_vec(count * n)?,
        )?;
        let c1 = RingElement::from_residues(
            ctx.ring(),
            level,
            Representation::Ntt,
            r.u64_vec(count * n)?,
        )?;
        let message_bound = r.f64()?;
        let noise_bound = r.f64()?;
        Ciphertext::from_parts(c0, c1, log2_scale, message_bound, noise_bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ckks::{CkksParams, Evaluator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let ctx = CkksContext::new(CkksParams::generate(64, 60, 2, 40, 60).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let keys = ctx.keygen(&mut rng);
        let eval = Evaluator::new(ctx.clone(), keys.evaluation.clone()).unwrap();
        let ct = ctx.encrypt_scalar(0.3, &keys.public, &mut rng).unwrap();
        for c in [ct.clone(), eval.mul(&ct, &ct).unwrap()] {
            let bytes = c.to_bytes();
            assert_eq!(&bytes[..4], b"ERLC");
            let back = Ciphertext::from_bytes(&ctx, &bytes).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let ctx = CkksContext::new(CkksParams::generate(64, 60, 1, 40, 60).unwrap()).unwrap();
        let keys = ctx.keygen(&mut ChaCha8Rng::seed_from_u64(2));
        let ct = ctx
            .encrypt_scalar(1.0, &keys.public, &mut ChaCha8Rng::seed_from_u64(3))
            .unwrap();
        let bytes = ct.to_bytes();
        assert!(Ciphertext::from_bytes(&ctx, &bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Ciphertext::from_bytes(&ctx, &bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            Ciphertext::from_bytes(&ctx, &bad),
            Err(Error::VersionMismatch(9))
        ));
        let other = CkksContext::new(CkksParams::generate(64, 59, 1, 40, 60).unwrap()).unwrap();
        assert!(matches!(
            Ciphertext::from_bytes(&other, &bytes),
            Err(Error::ParamsMismatch)
        ));
    }
}
