//! Public material the client hands to the cloud before any request.
//!
//! ```text
//! "ERLS" | version u16 | flags u8 | N u32 | log2Δ f64 | σ f64
//! | chain count u32 | chain primes | special prime u64
//! | digit count u32 | { b residues | a residues }... | crc32 u32
//! ```

use std::sync::Arc;

use crate::ckks::{put_u64s, CkksParams, EvaluationKey, Reader};
use crate::ring::RingParams;
use crate::{Error, Result};

pub const SETUP_MAGIC: &[u8; 4] = b"ERLS";
pub const SETUP_VERSION: u16 = 1;

const FLAG_CIRCUIT_PRIVACY: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct SetupMessage {
    pub params: CkksParams,
    pub evaluation: Arc<EvaluationKey>,
    pub circuit_privacy: bool,
}

impl SetupMessage {
    pub fn to_bytes(&self) -> Vec<u8> {
        let ring = self.params.ring();
        let mut out = Vec::new();
        out.extend_from_slice(SETUP_MAGIC);
        out.extend_from_slice(&SETUP_VERSION.to_le_bytes());
        out.push(if self.circuit_privacy {
            FLAG_CIRCUIT_PRIVACY
        } else {
            0
        });
        out.extend_from_slice(&(ring.degree() as u32).to_le_bytes());
        out.extend_from_slice(&self.params.log2_scale().to_le_bytes());
        out.extend_from_slice(&self.params.sigma().to_le_bytes());
        out.extend_from_slice(&(ring.chain().len() as u32).to_le_bytes());
        put_u64s(&mut out, ring.chain());
        out.extend_from_slice(&ring.special().unwrap_or(0).to_le_bytes());
        let digits = self.evaluation.digit_count();
        out.extend_from_slice(&(digits as u32).to_le_bytes());
        for i in 0..digits {
            let (b, a) = self.evaluation.digit(i);
            put_u64s(&mut out, b);
            put_u64s(&mut out, a);
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != SETUP_MAGIC {
            return Err(Error::Protocol("bad setup magic".into()));
        }
        let version = r.u16()?;
        if version != SETUP_VERSION {
            return Err(Error::VersionMismatch(version));
        }
        if bytes.len() < 10 {
            return Err(Error::Framing("setup message truncated".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().expect("four bytes")) {
            return Err(Error::Checksum);
        }
        let mut r = Reader::new(&body[6..]);
        let flags = r.take(1)?[0];
        let n = r.u32()? as usize;
        let log2_scale = r.f64()?;
        let sigma = r.f64()?;
        let count = r.u32()? as usize;
        if count == 0 || count > 64 {
            return Err(Error::Protocol(format!("implausible chain length {count}")));
        }
        let chain = r.u64_vec(count)?;
        let special = r.u64()?;
        let ring = RingParams::new(n, chain, (special != 0).then_some(special))?;
        let params = CkksParams::new(ring, log2_scale, sigma)?;
        let digits = r.u32()? as usize;
        if digits != count {
            return Err(Error::ParamsMismatch);
        }
        let len = (count + 1) * n;
        let mut raw = Vec::with_capacity(digits);
        for _ in 0..digits {
            let b = r.u64_vec(len)?;
            let a = r.u64_vec(len)?;
            raw.push((b, a));
        }
        if r.remaining() != 0 {
            return Err(Error::Framing(format!(
                "{} trailing bytes in setup",
                r.remaining()
            )));
        }
        Ok(Self {
            params,
            evaluation: Arc::new(EvaluationKey::from_raw(raw)),
            circuit_privacy: flags & FLAG_CIRCUIT_PRIVACY != 0,
        })
    }
}
