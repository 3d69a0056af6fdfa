//! One arithmetic interface over plaintext, noisy plaintext and encrypted
//! values, so update rules are written once.

mod noise;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::ckks::{Ciphertext, CkksContext, CkksParams, Evaluator, KeySet};
use crate::{Error, Result};

pub use noise::{NoiseMode, NoiseModel};

/// Arithmetic used by the update circuits. Implementations decide how
/// operands at different levels are reconciled.
pub trait Arithmetic {
    type Value: Clone;

    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn sub(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn mul(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn neg(&mut self, a: &Self::Value) -> Result<Self::Value>;
    fn mul_const(&mut self, a: &Self::Value, c: f64) -> Result<Self::Value>;
    fn add_const(&mut self, a: &Self::Value, c: f64) -> Result<Self::Value>;
}

/// Ciphertext arithmetic with automatic alignment: operands are brought to
/// the lower of their levels at that level's canonical scale.
impl Arithmetic for Evaluator {
    type Value = Ciphertext;

    fn add(&mut self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let (a, b) = self.align_pair(a, b)?;
        Evaluator::add(self, &a, &b)
    }

    fn sub(&mut self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let (a, b) = self.align_pair(a, b)?;
        Evaluator::sub(self, &a, &b)
    }

    fn mul(&mut self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let (a, b) = self.align_pair(a, b)?;
        Evaluator::mul(self, &a, &b)
    }

    fn neg(&mut self, a: &Ciphertext) -> Result<Ciphertext> {
        Ok(Evaluator::neg(self, a))
    }

    fn mul_const(&mut self, a: &Ciphertext, c: f64) -> Result<Ciphertext> {
        if a.level() == 0 {
            return Err(Error::DepthExhausted { level: 0 });
        }
        self.mul_const_to(a, c, a.level() - 1)
    }

    fn add_const(&mut self, a: &Ciphertext, c: f64) -> Result<Ciphertext> {
        Evaluator::add_const(self, a, c)
    }
}

impl Evaluator {
    fn align_pair(&self, a: &Ciphertext, b: &Ciphertext) -> Result<(Ciphertext, Ciphertext)> {
        let level = a.level().min(b.level());
        Ok((self.align(a, level)?, self.align(b, level)?))
    }
}

/// Which backend to build, without its keys or generator state.
#[derive(Clone, Debug, PartialEq)]
pub enum BackendKind {
    Exact,
    BoundedNoise { eps: f64, mode: NoiseMode },
    Encrypted(CkksParams),
}

/// Client-side encryption state: context, keys and an evaluator.
#[derive(Debug)]
pub struct EncryptedBackend {
    pub ctx: Arc<CkksContext>,
    pub keys: KeySet,
    pub evaluator: Evaluator,
    rng: ChaCha20Rng,
}

impl EncryptedBackend {
    pub fn new(params: CkksParams, seed: u64) -> Result<Self> {
        let ctx = CkksContext::new(params)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let keys = ctx.keygen(&mut rng);
        let evaluator = Evaluator::new(ctx.clone(), keys.evaluation.clone())?;
        Ok(Self {
            ctx,
            keys,
            evaluator,
            rng,
        })
    }

    /// Encrypts under the secret key, which this party holds.
    pub fn encrypt(&mut self, x: f64) -> Result<Ciphertext> {
        let pt = self
            .ctx
            .encode_scalar(x, self.ctx.params().log2_scale(), self.ctx.max_level())?;
        self.ctx
            .encrypt_symmetric(&pt, &self.keys.secret, &mut self.rng)
    }

    pub fn encrypt_values(&mut self, xs: &[f64]) -> Result<Ciphertext> {
        let pt = self
            .ctx
            .encode(xs, self.ctx.params().log2_scale(), self.ctx.max_level())?;
        self.ctx
            .encrypt_symmetric(&pt, &self.keys.secret, &mut self.rng)
    }

    pub fn decrypt(&self, ct: &Ciphertext) -> Result<f64> {
        self.ctx.decrypt_scalar(ct, &self.keys.secret)
    }

    pub fn decrypt_values(&self, ct: &Ciphertext) -> Result<Vec<f64>> {
        self.ctx.decrypt_values(ct, &self.keys.secret)
    }
}

#[derive(Debug)]
enum Inner {
    Exact,
    Noise(NoiseModel),
    Encrypted(Box<EncryptedBackend>),
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    /// Value with a bound on its distance from the exact computation.
    Plain {
        value: f64,
        err: f64,
    },
    Cipher(Box<Ciphertext>),
}

/// A value owned by one backend instance.
#[derive(Clone, Debug, PartialEq)]
pub struct SecureValue {
    backend: u64,
    repr: Repr,
}

impl SecureValue {
    pub fn ciphertext(&self) -> Option<&Ciphertext> {
        match &self.repr {
            Repr::Cipher(ct) => Some(ct),
            Repr::Plain { .. } => None,
        }
    }

    /// Worst-case distance from the exact result of the same circuit.
    pub fn error_bound(&self) -> f64 {
        match &self.repr {
            Repr::Plain { err, .. } => *err,
            Repr::Cipher(ct) => ct.noise_epsilon(),
        }
    }
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug)]
pub struct Backend {
    id: u64,
    inner: Inner,
}

impl Backend {
    fn with(inner: Inner) -> Self {
        Self {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            inner,
        }
    }

    pub fn exact() -> Self {
        Self::with(Inner::Exact)
    }

    pub fn bounded_noise(eps: f64, mode: NoiseMode, seed: u64) -> Result<Self> {
        Ok(Self::with(Inner::Noise(NoiseModel::new(eps, mode, seed)?)))
    }

    pub fn encrypted(params: CkksParams, seed: u64) -> Result<Self> {
        Ok(Self::with(Inner::Encrypted(Box::new(
            EncryptedBackend::new(params, seed)?,
        ))))
    }

    pub fn from_kind(kind: &BackendKind, seed: u64) -> Result<Self> {
        match kind {
            BackendKind::Exact => Ok(Self::exact()),
            BackendKind::BoundedNoise { eps, mode } => Self::bounded_noise(*eps, *mode, seed),
            BackendKind::Encrypted(params) => Self::encrypted(params.clone(), seed),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.inner, Inner::Exact)
    }

    pub fn name(&self) -> &'static str {
        match self.inner {
            Inner::Exact => "exact",
            Inner::Noise(_) => "noise",
            Inner::Encrypted(_) => "encrypted",
        }
    }

    pub fn encrypted_state(&self) -> Option<&EncryptedBackend> {
        match &self.inner {
            Inner::Encrypted(e) => Some(e),
            _ => None,
        }
    }

    pub fn encrypt(&mut self, x: f64) -> Result<SecureValue> {
        let repr = match &mut self.inner {
            Inner::Exact | Inner::Noise(_) => Repr::Plain { value: x, err: 0.0 },
            Inner::Encrypted(e) => Repr::Cipher(Box::new(e.encrypt(x)?)),
        };
        Ok(SecureValue {
            backend: self.id,
            repr,
        })
    }

    pub fn decrypt(&self, v: &SecureValue) -> Result<f64> {
        self.check(v)?;
        match (&self.inner, &v.repr) {
            (_, Repr::Plain { value, .. }) => Ok(*value),
            (Inner::Encrypted(e), Repr::Cipher(ct)) => e.decrypt(ct),
            _ => Err(Error::BackendMismatch),
        }
    }

    fn check(&self, v: &SecureValue) -> Result<()> {
        if v.backend != self.id {
            return Err(Error::BackendMismatch);
        }
        Ok(())
    }

    fn plain(&self, v: &SecureValue) -> Result<(f64, f64)> {
        self.check(v)?;
        match v.repr {
            Repr::Plain { value, err } => Ok((value, err)),
            Repr::Cipher(_) => Err(Error::BackendMismatch),
        }
    }

    fn cipher<'a>(&self, v: &'a SecureValue) -> Result<&'a Ciphertext> {
        self.check(v)?;
        match &v.repr {
            Repr::Cipher(ct) => Ok(ct),
            Repr::Plain { .. } => Err(Error::BackendMismatch),
        }
    }

    /// Emits a plaintext result, perturbed once in noise mode.
    fn emit(&mut self, value: f64, err: f64) -> SecureValue {
        let (value, err) = match &mut self.inner {
            Inner::Noise(model) if model.eps() > 0.0 => (value + model.draw(), err + model.eps()),
            _ => (value, err),
        };
        SecureValue {
            backend: self.id,
            repr: Repr::Plain { value, err },
        }
    }

    fn emit_cipher(&self, ct: Ciphertext) -> SecureValue {
        SecureValue {
            backend: self.id,
            repr: Repr::Cipher(Box::new(ct)),
        }
    }

    fn binary(
        &mut self,
        a: &SecureValue,
        b: &SecureValue,
        plain: impl Fn(f64, f64, f64, f64) -> (f64, f64),
        cipher: impl Fn(&mut Evaluator, &Ciphertext, &Ciphertext) -> Result<Ciphertext>,
    ) -> Result<SecureValue> {
        if let Inner::Encrypted(e) = &mut self.inner {
            let (x, y) = (a, b);
            let ct = {
                let (ca, cb) = match (&x.repr, &y.repr) {
                    (Repr::Cipher(ca), Repr::Cipher(cb))
                        if x.backend == self.id && y.backend == self.id =>
                    {
                        (ca, cb)
                    }
                    _ => return Err(Error::BackendMismatch),
                };
                cipher(&mut e.evaluator, ca, cb)?
            };
            return Ok(self.emit_cipher(ct));
        }
        let (x, ex) = self.plain(a)?;
        let (y, ey) = self.plain(b)?;
        let (v, err) = plain(x, ex, y, ey);
        Ok(self.emit(v, err))
    }
}

impl Arithmetic for Backend {
    type Value = SecureValue;

    fn add(&mut self, a: &SecureValue, b: &SecureValue) -> Result<SecureValue> {
        self.binary(
            a,
            b,
            |x, ex, y, ey| (x + y, ex + ey),
            Arithmetic::add,
        )
    }

    fn sub(&mut self, a: &SecureValue, b: &SecureValue) -> Result<SecureValue> {
        self.binary(
            a,
            b,
            |x, ex, y, ey| (x - y, ex + ey),
            Arithmetic::sub,
        )
    }

    fn mul(&mut self, a: &SecureValue, b: &SecureValue) -> Result<SecureValue> {
        self.binary(
            a,
            b,
            |x, ex, y, ey| (x * y, x.abs() * ey + y.abs() * ex + ex * ey),
            Arithmetic::mul,
        )
    }

    fn neg(&mut self, a: &SecureValue) -> Result<SecureValue> {
        if let Inner::Encrypted(e) = &self.inner {
            let ct = e.evaluator.neg(self.cipher(a)?);
            return Ok(self.emit_cipher(ct));
        }
        let (x, ex) = self.plain(a)?;
        Ok(SecureValue {
            backend: self.id,
            repr: Repr::Plain { value: -x, err: ex },
        })
    }

    fn mul_const(&mut self, a: &SecureValue, c: f64) -> Result<SecureValue> {
        if let Inner::Encrypted(e) = &mut self.inner {
            let ct = match &a.repr {
                Repr::Cipher(ct) if a.backend == self.id => {
                    Arithmetic::mul_const(&mut e.evaluator, ct, c)?
                }
                _ => return Err(Error::BackendMismatch),
            };
            return Ok(self.emit_cipher(ct));
        }
        let (x, ex) = self.plain(a)?;
        Ok(self.emit(c * x, c.abs() * ex))
    }

    fn add_const(&mut self, a: &SecureValue, c: f64) -> Result<SecureValue> {
        if let Inner::Encrypted(e) = &self.inner {
            let ct = e.evaluator.add_const(self.cipher(a)?, c)?;
            return Ok(self.emit_cipher(ct));
        }
        let (x, ex) = self.plain(a)?;
        Ok(self.emit(x + c, ex))
    }
}
