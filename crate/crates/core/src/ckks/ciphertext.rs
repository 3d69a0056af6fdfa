use rand::Rng;

use super::encoding::Plaintext;
use super::keys::{PublicKey, SecretKey};
use super::noise;
use super::params::CkksContext;
use crate::ring::{
    gaussian_coeffs, ternary_coeffs, uniform, Direction, Representation, RingElement,
};
use crate::{Error, Result};

/// `(c0, c1)` in NTT form with its level, scale, message bound `p` and
/// noise bound `B`. `B` bounds the canonical-embedding norm of
/// `c0 + c1 s - Δ m` for the encrypted slots `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ciphertext {
    pub(crate) c0: RingElement,
    pub(crate) c1: RingElement,
    pub(crate) log2_scale: f64,
    pub(crate) message_bound: f64,
    pub(crate) noise_bound: f64,
}

impl Ciphertext {
    pub fn level(&self) -> usize {
        self.c0.level()
    }

    pub fn log2_scale(&self) -> f64 {
        self.log2_scale
    }

    pub fn scale(&self) -> f64 {
        self.log2_scale.exp2()
    }

    /// `p`: bound on the magnitude of every encrypted slot value.
    pub fn message_bound(&self) -> f64 {
        self.message_bound
    }

    /// `B`: bound on the error, in units of the scaled plaintext.
    pub fn noise_bound(&self) -> f64 {
        self.noise_bound
    }

    /// Worst-case slot error `B / Δ`.
    pub fn noise_epsilon(&self) -> f64 {
        self.noise_bound / self.scale()
    }

    pub fn c0(&self) -> &RingElement {
        &self.c0
    }

    pub fn c1(&self) -> &RingElement {
        &self.c1
    }

    /// Reassembles a ciphertext from its parts; both elements must be in
    /// NTT form at the same level.
    pub fn from_parts(
        c0: RingElement,
        c1: RingElement,
        log2_scale: f64,
        message_bound: f64,
        noise_bound: f64,
    ) -> Result<Self> {
        if c0.level() != c1.level() {
            return Err(Error::LevelMismatch {
                left: c0.level(),
                right: c1.level(),
            });
        }
        if c0.representation() != crate::ring::Representation::Ntt
            || c1.representation() != c0.representation()
        {
            return Err(Error::WrongRepresentation("coefficient"));
        }
        if !(noise_bound >= 0.0) || !(message_bound >= 0.0) {
            return Err(Error::InvalidNoise(noise_bound.min(message_bound)));
        }
        Ok(Self {
            c0,
            c1,
            log2_scale,
            message_bound,
            noise_bound,
        })
    }
}

impl CkksContext {
    pub fn encrypt<R: Rng + ?Sized>(
        &self,
        pt: &Plaintext,
        pk: &PublicKey,
        rng: &mut R,
    ) -> Result<Ciphertext> {
        let top = self.max_level();
        if pt.level() != top {
            return Err(Error::LevelMismatch {
                left: pt.level(),
                right: top,
            });
        }
        if pk.b.context().params() != self.ring().params() {
            return Err(Error::ParamsMismatch);
        }
        let n = self.degree();
        let mut v = RingElement::from_signed(self.ring(), top, &ternary_coeffs(n, rng));
        v.ntt_in_place(Direction::Forward)?;
        let mut e0 =
            RingElement::from_signed(self.ring(), top, &gaussian_coeffs(n, self.gaussian(), rng));
        let mut e1 =
            RingElement::from_signed(self.ring(), top, &gaussian_coeffs(n, self.gaussian(), rng));
        e1.ntt_in_place(Direction::Forward)?;
        // m + e0 costs one transform when m is in coefficient form
        if pt.poly().representation() == Representation::Coefficient {
            e0.add_assign(pt.poly())?;
            e0.ntt_in_place(Direction::Forward)?;
        } else {
            e0.ntt_in_place(Direction::Forward)?;
            e0.add_assign(pt.poly())?;
        }
        let mut c0 = v.mul(&pk.b)?;
        c0.add_assign(&e0)?;
        let mut c1 = v.mul(&pk.a)?;
        c1.add_assign(&e1)?;
        Ok(Ciphertext {
            c0,
            c1,
            log2_scale: pt.log2_scale(),
            message_bound: pt.message_bound(),
            noise_bound: noise::fresh(n, self.params().sigma()),
        })
    }

    /// Secret-key encryption `(-a s + m + e, a)` with `a` uniform. Only the
    /// key owner can produce it, and it carries less noise than
    /// [`CkksContext::encrypt`].
    pub fn encrypt_symmetric<R: Rng + ?Sized>(
        &self,
        pt: &Plaintext,
        sk: &SecretKey,
        rng: &mut R,
    ) -> Result<Ciphertext> {
        let top = self.max_level();
        if pt.level() != top {
            return Err(Error::LevelMismatch {
                left: pt.level(),
                right: top,
            });
        }
        let n = self.degree();
        let a = uniform(self.ring(), top, Representation::Ntt, rng);
        let mut me =
            RingElement::from_signed(self.ring(), top, &gaussian_coeffs(n, self.gaussian(), rng));
        if pt.poly().representation() == Representation::Coefficient {
            me.add_assign(pt.poly())?;
            me.ntt_in_place(Direction::Forward)?;
        } else {
            me.ntt_in_place(Direction::Forward)?;
            me.add_assign(pt.poly())?;
        }
        let mut c0 = a.mul(&sk.at_level(self, top))?;
        c0 = c0.neg();
        c0.add_assign(&me)?;
        Ok(Ciphertext {
            c0,
            c1: a,
            log2_scale: pt.log2_scale(),
            message_bound: pt.message_bound(),
            noise_bound: noise::fresh_symmetric(n, self.params().sigma()),
        })
    }

    pub fn encrypt_values<R: Rng + ?Sized>(
        &self,
        values: &[f64],
        pk: &PublicKey,
        rng: &mut R,
    ) -> Result<Ciphertext> {
        let pt = self.encode(values, self.params().log2_scale(), self.max_level())?;
        self.encrypt(&pt, pk, rng)
    }

    /// Encrypts `x` into every slot.
    pub fn encrypt_scalar<R: Rng + ?Sized>(
        &self,
        x: f64,
        pk: &PublicKey,
        rng: &mut R,
    ) -> Result<Ciphertext> {
        let pt = self.encode_scalar(x, self.params().log2_scale(), self.max_level())?;
        self.encrypt(&pt, pk, rng)
    }

    /// `c0 + c1 s` at the ciphertext's level. Fails when the tracked
    /// bounds no longer guarantee the result is below `Q_l / 2`.
    pub fn decrypt(&self, ct: &Ciphertext, sk: &SecretKey) -> Result<Plaintext> {
        if ct.c0.context().params() != self.ring().params() {
            return Err(Error::ParamsMismatch);
        }
        let level = ct.level();
        let coeff_bound = ct.message_bound * ct.scale() + ct.noise_bound;
        if !coeff_bound.is_finite()
            || coeff_bound.log2() >= self.params().ring().log2_modulus(level) - 1.0
        {
            return Err(Error::DecryptionFailure {
                level,
                bound: coeff_bound,
            });
        }
        let s = sk.at_level(self, level);
        let mut m = ct.c1.mul(&s)?;
        m.add_assign(&ct.c0)?;
        Ok(Plaintext::from_decryption(
            m.to_coefficient(),
            ct.log2_scale,
            ct.message_bound,
            coeff_bound,
        ))
    }

    pub fn decrypt_values(&self, ct: &Ciphertext, sk: &SecretKey) -> Result<Vec<f64>> {
        Ok(self.decode(&self.decrypt(ct, sk)?))
    }

    /// Slot 0, which holds the value of a scalar encryption.
    pub fn decrypt_scalar(&self, ct: &Ciphertext, sk: &SecretKey) -> Result<f64> {
        Ok(self.decrypt_values(ct, sk)?[0])
    }
}
