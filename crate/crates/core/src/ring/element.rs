use std::fmt;
use std::sync::Arc;

use super::params::RingContext;
use crate::{Error, Result};

/// Whether residues hold polynomial coefficients or NTT evaluations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Coefficient,
    Ntt,
}

impl Representation {
    fn name(self) -> &'static str {
        match self {
            Representation::Coefficient => "coefficient",
            Representation::Ntt => "NTT",
        }
    }
}

/// Direction of [`RingElement::ntt_transform`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// An element of `R_Q = Z_Q[X]/(X^N + 1)` in residue-number-system form.
///
/// Residues are stored prime-major: the `N` residues modulo `q_i` occupy
/// `data[i*N .. (i+1)*N]`, for `i` in `0..=level`.
#[derive(Clone)]
pub struct RingElement {
    ctx: Arc<RingContext>,
    level: usize,
    repr: Representation,
    data: Vec<u64>,
}

impl PartialEq for RingElement {
    fn eq(&self, other: &Self) -> bool {
        self.ctx.params() == other.ctx.params()
            && self.level == other.level
            && self.repr == other.repr
            && self.data == other.data
    }
}

impl Eq for RingElement {}

impl fmt::Debug for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RingElement")
            .field("degree", &self.ctx.degree())
            .field("level", &self.level)
            .field("repr", &self.repr)
            .finish_non_exhaustive()
    }
}

impl RingElement {
    pub fn zero(ctx: &Arc<RingContext>, level: usize, repr: Representation) -> Self {
        assert!(level <= ctx.max_level());
        Self {
            ctx: ctx.clone(),
            level,
            repr,
            data: vec![0; (level + 1) * ctx.degree()],
        }
    }

    /// Builds an element from raw residues, checking shape and reduction.
    pub fn from_residues(
        ctx: &Arc<RingContext>,
        level: usize,
        repr: Representation,
        data: Vec<u64>,
    ) -> Result<Self> {
        if level > ctx.max_level() {
            return Err(Error::InvalidParams(format!("level {level} beyond chain")));
        }
        let n = ctx.degree();
        if data.len() != (level + 1) * n {
            return Err(Error::DimensionMismatch {
                expected: (level + 1) * n,
                actual: data.len(),
            });
        }
        for i in 0..=level {
            let q = ctx.modulus(i).value();
            if data[i * n..(i + 1) * n].iter().any(|&x| x >= q) {
                return Err(Error::InvalidParams(format!(
                    "residue not reduced modulo {q}"
                )));
            }
        }
        Ok(Self {
            ctx: ctx.clone(),
            level,
            repr,
            data,
        })
    }

    /// Lifts signed integer coefficients into every active residue.
    pub fn from_signed(ctx: &Arc<RingContext>, level: usize, coeffs: &[i64]) -> Self {
        let n = ctx.degree();
        assert_eq!(coeffs.len(), n);
        let mut data = Vec::with_capacity((level + 1) * n);
        for i in 0..=level {
            let m = ctx.modulus(i);
            data.extend(coeffs.iter().map(|&c| m.reduce_i64(c)));
        }
        Self {
            ctx: ctx.clone(),
            level,
            repr: Representation::Coefficient,
            data,
        }
    }

    pub fn context(&self) -> &Arc<RingContext> {
        &self.ctx
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn degree(&self) -> usize {
        self.ctx.degree()
    }

    pub fn residues(&self, i: usize) -> &[u64] {
        let n = self.ctx.degree();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn raw(&self) -> &[u64] {
        &self.data
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.ctx.params() != other.ctx.params() {
            return Err(Error::ParamsMismatch);
        }
        if self.level != other.level {
            return Err(Error::LevelMismatch {
                left: self.level,
                right: other.level,
            });
        }
        if self.repr != other.repr {
            return Err(Error::RepresentationMismatch);
        }
        Ok(())
    }

    fn zip_apply(
        &mut self,
        other: &Self,
        f: impl Fn(&super::Modulus, u64, u64) -> u64,
    ) -> Result<()> {
        self.check_compatible(other)?;
        let n = self.ctx.degree();
        for i in 0..=self.level {
            let m = *self.ctx.modulus(i);
            let (a, b) = (
                &mut self.data[i * n..(i + 1) * n],
                &other.data[i * n..(i + 1) * n],
            );
            for (x, &y) in a.iter_mut().zip(b) {
                *x = f(&m, *x, y);
            }
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.zip_apply(other, |m, a, b| m.add(a, b))
    }

    pub fn sub_assign(&mut self, other: &Self) -> Result<()> {
        self.zip_apply(other, |m, a, b| m.sub(a, b))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.sub_assign(other)?;
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        let n = self.ctx.degree();
        for i in 0..=self.level {
            let m = *self.ctx.modulus(i);
            for x in &mut out.data[i * n..(i + 1) * n] {
                *x = m.neg(*x);
            }
        }
        out
    }

    /// Pointwise product; both operands must already be in NTT form.
    pub(crate) fn mul_ntt_assign(&mut self, other: &Self) -> Result<()> {
        if self.repr != Representation::Ntt {
            return Err(Error::WrongRepresentation("coefficient"));
        }
        self.zip_apply(other, |m, a, b| m.mul(a, b))
    }

    /// Negacyclic product. Coefficient-form operands are transformed and the
    /// result is returned in the operands' representation.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        match self.repr {
            Representation::Ntt => {
                let mut out = self.clone();
                out.mul_ntt_assign(other)?;
                Ok(out)
            }
            Representation::Coefficient => {
                let mut a = self.ntt_transform(Direction::Forward)?;
                let b = other.ntt_transform(Direction::Forward)?;
                a.mul_ntt_assign(&b)?;
                a.ntt_transform(Direction::Inverse)
            }
        }
    }

    /// Multiplies every residue by a signed integer constant.
    pub fn mul_scalar(&self, c: i128) -> Self {
        let mut out = self.clone();
        let n = self.ctx.degree();
        for i in 0..=self.level {
            let m = *self.ctx.modulus(i);
            let q = m.value() as i128;
            let r = c.rem_euclid(q) as u64;
            let rs = m.shoup(r);
            for x in &mut out.data[i * n..(i + 1) * n] {
                *x = m.mul_shoup(*x, r, rs);
            }
        }
        out
    }

    /// Adds a signed integer constant polynomial `c` (i.e. `c * 1`).
    pub fn add_constant(&self, c: i128) -> Self {
        let mut out = self.clone();
        let n = self.ctx.degree();
        for i in 0..=self.level {
            let m = *self.ctx.modulus(i);
            let r = c.rem_euclid(m.value() as i128) as u64;
            let slice = &mut out.data[i * n..(i + 1) * n];
            match self.repr {
                // The constant polynomial evaluates to c at every root.
                Representation::Ntt => slice.iter_mut().for_each(|x| *x = m.add(*x, r)),
                Representation::Coefficient => slice[0] = m.add(slice[0], r),
            }
        }
        out
    }

    pub fn ntt_transform(&self, direction: Direction) -> Result<Self> {
        let mut out = self.clone();
        out.ntt_in_place(direction)?;
        Ok(out)
    }

    pub fn ntt_in_place(&mut self, direction: Direction) -> Result<()> {
        let target = match direction {
            Direction::Forward => Representation::Ntt,
            Direction::Inverse => Representation::Coefficient,
        };
        if self.repr == target {
            return Err(Error::WrongRepresentation(target.name()));
        }
        let n = self.ctx.degree();
        for i in 0..=self.level {
            let table = self.ctx.table(i);
            let slice = &mut self.data[i * n..(i + 1) * n];
            match direction {
                Direction::Forward => table.forward(slice),
                Direction::Inverse => table.inverse(slice),
            }
        }
        self.repr = target;
        Ok(())
    }

    pub fn to_ntt(&self) -> Self {
        if self.repr == Representation::Ntt {
            self.clone()
        } else {
            self.ntt_transform(Direction::Forward)
                .expect("checked representation")
        }
    }

    pub fn to_coefficient(&self) -> Self {
        if self.repr == Representation::Coefficient {
            self.clone()
        } else {
            self.ntt_transform(Direction::Inverse)
                .expect("checked representation")
        }
    }

    /// Removes the top active prime, keeping the other residues unchanged.
    pub fn mod_drop(&self) -> Result<Self> {
        if self.level == 0 {
            return Err(Error::CannotDrop);
        }
        let mut out = self.clone();
        out.level -= 1;
        out.data.truncate((out.level + 1) * self.ctx.degree());
        Ok(out)
    }

    pub fn mod_drop_to(&self, level: usize) -> Result<Self> {
        if level > self.level {
            return Err(Error::LevelMismatch {
                left: self.level,
                right: level,
            });
        }
        let data = self.data[..(level + 1) * self.ctx.degree()].to_vec();
        Ok(Self {
            ctx: self.ctx.clone(),
            level,
            repr: self.repr,
            data,
        })
    }

    /// Centered coefficients modulo `q_0`; only meaningful when every true
    /// coefficient is below `q_0 / 2` in magnitude.
    pub fn centered_q0(&self) -> Vec<i64> {
        let coeff = self.to_coefficient();
        let m = self.ctx.modulus(0);
        coeff.residues(0).iter().map(|&x| m.center(x)).collect()
    }

    /// Builds an element from a full residue buffer without validation.
    pub(crate) fn from_raw_unchecked(
        ctx: &Arc<RingContext>,
        level: usize,
        repr: Representation,
        data: Vec<u64>,
    ) -> Self {
        debug_assert_eq!(data.len(), (level + 1) * ctx.degree());
        Self {
            ctx: ctx.clone(),
            level,
            repr,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::RingParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_ctx() -> Arc<RingContext> {
        RingContext::new(RingParams::new(16, vec![97, 193], None).unwrap())
    }

    fn random(ctx: &Arc<RingContext>, rng: &mut ChaCha8Rng) -> RingElement {
        let coeffs: Vec<i64> = (0..ctx.degree())
            .map(|_| rng.gen_range(-500..500))
            .collect();
        RingElement::from_signed(ctx, ctx.max_level(), &coeffs)
    }

    #[test]
    fn identities() {
        let ctx = small_ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(&ctx, &mut rng);
        let zero = RingElement::zero(&ctx, 1, Representation::Coefficient);
        assert_eq!(a.add(&zero).unwrap(), a);
        assert_eq!(a.add(&a.neg()).unwrap(), zero);
        let mut one = vec![0i64; 16];
        one[0] = 1;
        let one = RingElement::from_signed(&ctx, 1, &one);
        assert_eq!(a.mul(&one).unwrap(), a);
    }

    #[test]
    fn x_half_squared_is_minus_one() {
        let ctx = small_ctx();
        let mut x8 = vec![0i64; 16];
        x8[8] = 1;
        let x8 = RingElement::from_signed(&ctx, 1, &x8);
        let sq = x8.mul(&x8).unwrap();
        assert_eq!(sq.residues(0)[0], 96);
        assert_eq!(sq.residues(1)[0], 192);
        assert!(sq.residues(0)[1..].iter().all(|&c| c == 0));
    }

    #[test]
    fn structural_errors() {
        let ctx = small_ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(&ctx, &mut rng);
        let b = a.mod_drop().unwrap();
        assert!(matches!(a.add(&b), Err(Error::LevelMismatch { .. })));
        let an = a.to_ntt();
        assert!(matches!(a.add(&an), Err(Error::RepresentationMismatch)));
        assert!(matches!(
            an.ntt_transform(Direction::Forward),
            Err(Error::WrongRepresentation(_))
        ));
        assert!(matches!(b.mod_drop(), Err(Error::CannotDrop)));
    }

    #[test]
    fn mod_drop_keeps_lower_residues() {
        let ctx = RingContext::new(RingParams::new(16, vec![97, 193, 353], None).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(&ctx, &mut rng);
        let d1 = a.mod_drop().unwrap();
        assert_eq!(d1.level(), 1);
        assert_eq!(d1.residues(0), a.residues(0));
        assert_eq!(d1.residues(1), a.residues(1));
        assert_eq!(d1.mod_drop().unwrap().level(), 0);
    }

    #[test]
    fn constant_add_agrees_across_representations() {
        let ctx = small_ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random(&ctx, &mut rng);
        let via_coeff = a.add_constant(-7).to_ntt();
        let via_ntt = a.to_ntt().add_constant(-7);
        assert_eq!(via_coeff, via_ntt);
        assert_eq!(a.mul_scalar(3), a.add(&a).unwrap().add(&a).unwrap());
    }
}
