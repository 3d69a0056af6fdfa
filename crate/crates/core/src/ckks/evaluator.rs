use std::sync::Arc;

use super::ciphertext::Ciphertext;
use super::keys::EvaluationKey;
use super::noise;
use super::params::CkksContext;
use crate::ring::{Representation, RingElement};
use crate::{Error, Result};

/// Homomorphic operations. Holds only public material, so a server can
/// own one without any secret.
#[derive(Clone, Debug)]
pub struct Evaluator {
    ctx: Arc<CkksContext>,
    evk: Arc<EvaluationKey>,
    // Shoup companions of every evaluation key residue, same layout
    evk_shoup: Arc<Vec<(Vec<u64>, Vec<u64>)>>,
}

impl Evaluator {
    pub fn new(ctx: Arc<CkksContext>, evk: Arc<EvaluationKey>) -> Result<Self> {
        let expected = ctx.max_level() + 1;
        let n = ctx.degree();
        let len = (ctx.special_index() + 1) * n;
        if evk.digit_count() != expected
            || evk
                .digits
                .iter()
                .any(|(b, a)| b.data.len() != len || a.data.len() != len)
        {
            return Err(Error::ParamsMismatch);
        }
        let shoup = |data: &[u64]| -> Vec<u64> {
            data.chunks_exact(n)
                .enumerate()
                .flat_map(|(i, r)| {
                    let m = *ctx.ring().modulus(i);
                    r.iter().map(move |&w| m.shoup(w))
                })
                .collect()
        };
        let evk_shoup = Arc::new(
            evk.digits
                .iter()
                .map(|(b, a)| (shoup(&b.data), shoup(&a.data)))
                .collect(),
        );
        Ok(Self {
            ctx,
            evk,
            evk_shoup,
        })
    }

    pub fn context(&self) -> &Arc<CkksContext> {
        &self.ctx
    }

    pub fn evaluation_key(&self) -> &Arc<EvaluationKey> {
        &self.evk
    }

    fn check_same(a: &Ciphertext, b: &Ciphertext) -> Result<()> {
        if a.c0.context().params() != b.c0.context().params() {
            return Err(Error::ParamsMismatch);
        }
        if a.level() != b.level() {
            return Err(Error::LevelMismatch {
                left: a.level(),
                right: b.level(),
            });
        }
        if a.log2_scale != b.log2_scale {
            return Err(Error::ScaleMismatch {
                left: a.log2_scale,
                right: b.log2_scale,
            });
        }
        Ok(())
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        Self::check_same(a, b)?;
        Ok(Ciphertext {
            c0: a.c0.add(&b.c0)?,
            c1: a.c1.add(&b.c1)?,
            log2_scale: a.log2_scale,
            message_bound: a.message_bound + b.message_bound,
            noise_bound: a.noise_bound + b.noise_bound,
        })
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        Self::check_same(a, b)?;
        Ok(Ciphertext {
            c0: a.c0.sub(&b.c0)?,
            c1: a.c1.sub(&b.c1)?,
            log2_scale: a.log2_scale,
            message_bound: a.message_bound + b.message_bound,
            noise_bound: a.noise_bound + b.noise_bound,
        })
    }

    pub fn neg(&self, a: &Ciphertext) -> Ciphertext {
        Ciphertext {
            c0: a.c0.neg(),
            c1: a.c1.neg(),
            log2_scale: a.log2_scale,
            message_bound: a.message_bound,
            noise_bound: a.noise_bound,
        }
    }

    /// Adds the real constant `c` to every slot.
    pub fn add_const(&self, a: &Ciphertext, c: f64) -> Result<Ciphertext> {
        let k = (c * a.scale()).round();
        if !k.is_finite() || k.abs() >= 2f64.powi(120) {
            return Err(Error::MessageOverflow(c));
        }
        Ok(Ciphertext {
            c0: a.c0.add_constant(k as i128),
            message_bound: a.message_bound + c.abs(),
            noise_bound: a.noise_bound + 0.5,
            c1: a.c1.clone(),
            log2_scale: a.log2_scale,
        })
    }

    /// Multiplies by an integer without changing level or scale.
    pub fn mul_int(&self, a: &Ciphertext, k: i64) -> Ciphertext {
        let f = (k as f64).abs();
        Ciphertext {
            c0: a.c0.mul_scalar(k as i128),
            c1: a.c1.mul_scalar(k as i128),
            message_bound: a.message_bound * f,
            noise_bound: a.noise_bound * f.max(1.0),
            log2_scale: a.log2_scale,
        }
    }

    /// Tensor product and relinearization, without rescaling. The result
    /// carries the product of the input scales.
    pub fn mul_relin(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        Self::check_same(a, b)?;
        let level = a.level();
        let d0 = a.c0.mul(&b.c0)?;
        let mut d1 = a.c0.mul(&b.c1)?;
        d1.add_assign(&a.c1.mul(&b.c0)?)?;
        let d2 = a.c1.mul(&b.c1)?;
        let (k0, k1) = self.key_switch(&d2);
        let mut c0 = d0;
        c0.add_assign(&k0)?;
        let mut c1 = d1;
        c1.add_assign(&k1)?;
        let ks = noise::key_switch(
            self.ctx.degree(),
            self.ctx.params().sigma(),
            &self.ctx.params().ring().chain()[..=level],
            self.ctx.params().ring().special().expect("checked"),
        );
        let noise_bound = noise::product_before_rescale(
            a.message_bound,
            a.scale(),
            b.noise_bound,
            b.message_bound,
            b.scale(),
            a.noise_bound,
            ks,
        );
        Ok(Ciphertext {
            c0,
            c1,
            log2_scale: a.log2_scale + b.log2_scale,
            message_bound: a.message_bound * b.message_bound,
            noise_bound,
        })
    }

    /// Product of two ciphertexts at the same level and scale, landing one
    /// level lower. The division by the special prime and the rescale
    /// happen together, as one division by `P q_l`.
    pub fn mul(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        if a.level() == 0 || b.level() == 0 {
            return Err(Error::DepthExhausted { level: 0 });
        }
        Self::check_same(a, b)?;
        let level = a.level();
        let d0 = a.c0.mul(&b.c0)?;
        let mut d1 = a.c0.mul(&b.c1)?;
        d1.add_assign(&a.c1.mul(&b.c0)?)?;
        let d2 = a.c1.mul(&b.c1)?;
        let (acc0, acc1) = self.key_switch_acc(&d2);
        let ks = noise::key_switch(
            self.ctx.degree(),
            self.ctx.params().sigma(),
            &self.ctx.params().ring().chain()[..=level],
            self.ctx.params().ring().special().expect("checked"),
        );
        let before = noise::product_before_rescale(
            a.message_bound,
            a.scale(),
            b.noise_bound,
            b.message_bound,
            b.scale(),
            a.noise_bound,
            ks,
        );
        let q = self.ctx.params().ring().chain()[level];
        Ok(Ciphertext {
            c0: self.fused_down(acc0, &d0),
            c1: self.fused_down(acc1, &d1),
            log2_scale: a.log2_scale + b.log2_scale - (q as f64).log2(),
            message_bound: a.message_bound * b.message_bound,
            noise_bound: noise::rescaled(before, q, self.ctx.degree()),
        })
    }

    pub fn square(&self, a: &Ciphertext) -> Result<Ciphertext> {
        self.mul(a, a)
    }

    /// Divides by the top prime `q_l` with rounding and drops it.
    pub fn rescale(&self, a: &Ciphertext) -> Result<Ciphertext> {
        let level = a.level();
        if level == 0 {
            return Err(Error::DepthExhausted { level });
        }
        let q = self.ctx.params().ring().chain()[level];
        Ok(Ciphertext {
            c0: self.rescale_poly(&a.c0),
            c1: self.rescale_poly(&a.c1),
            log2_scale: a.log2_scale - (q as f64).log2(),
            message_bound: a.message_bound,
            noise_bound: noise::rescaled(a.noise_bound, q, self.ctx.degree()),
        })
    }

    /// Drops primes down to `level` without dividing; scale is unchanged.
    pub fn mod_drop_to(&self, a: &Ciphertext, level: usize) -> Result<Ciphertext> {
        Ok(Ciphertext {
            c0: a.c0.mod_drop_to(level)?,
            c1: a.c1.mod_drop_to(level)?,
            log2_scale: a.log2_scale,
            message_bound: a.message_bound,
            noise_bound: a.noise_bound,
        })
    }

    /// `c * a` placed at `target` with that level's canonical scale: drops
    /// to `target + 1`, multiplies by the nearest integer to
    /// `c Δ_target q_{target+1} / Δ_a`, then rescales.
    pub fn mul_const_to(&self, a: &Ciphertext, c: f64, target: usize) -> Result<Ciphertext> {
        if a.level() == 0 {
            return Err(Error::DepthExhausted { level: 0 });
        }
        if target >= a.level() {
            return Err(Error::LevelMismatch {
                left: a.level(),
                right: target,
            });
        }
        if !c.is_finite() {
            return Err(Error::MessageOverflow(c));
        }
        let q = self.ctx.params().ring().chain()[target + 1];
        let log_target = self.ctx.level_log2_scale(target);
        // scale-preserving multiplier: Δ_target q / Δ_a
        let unit = (log_target + (q as f64).log2() - a.log2_scale).exp2();
        let k = (c * unit).round();
        if k.abs() >= 2f64.powi(100) {
            return Err(Error::MessageOverflow(c));
        }
        let dropped = self.mod_drop_to(a, target + 1)?;
        let kk = k as i128;
        let scaled = Ciphertext {
            c0: dropped.c0.mul_scalar(kk),
            c1: dropped.c1.mul_scalar(kk),
            ..dropped
        };
        let q_f = q as f64;
        let s_target = log_target.exp2();
        // k Δ_a / q = c_eff Δ_target
        let c_eff = k * a.scale() / q_f / s_target;
        let noise_bound = (c_eff - c).abs() * s_target * a.message_bound
            + k.abs().max(unit) * a.noise_bound / q_f
            + noise::rounding(self.ctx.degree());
        Ok(Ciphertext {
            c0: self.rescale_poly(&scaled.c0),
            c1: self.rescale_poly(&scaled.c1),
            log2_scale: log_target,
            message_bound: c.abs() * a.message_bound,
            noise_bound,
        })
    }

    /// Brings `a` to `level` at that level's canonical scale, spending one
    /// rescale unless it is already there.
    pub fn align(&self, a: &Ciphertext, level: usize) -> Result<Ciphertext> {
        if a.level() == level && a.log2_scale == self.ctx.level_log2_scale(level) {
            return Ok(a.clone());
        }
        self.mul_const_to(a, 1.0, level)
    }

    /// Key switches `d` from `s^2` to `s`, returning the two components to
    /// add to `(c0, c1)`.
    fn key_switch(&self, d: &RingElement) -> (RingElement, RingElement) {
        let level = d.level();
        let (acc0, acc1) = self.key_switch_acc(d);
        (self.mod_down(acc0, level), self.mod_down(acc1, level))
    }

    /// Key-switch products over `q_0..q_l, P`, before dividing by `P`.
    fn key_switch_acc(&self, d: &RingElement) -> (Vec<u64>, Vec<u64>) {
        let ctx = &self.ctx;
        let ring = ctx.ring();
        let n = ctx.degree();
        let level = d.level();
        let special = ctx.special_index();
        let targets: Vec<usize> = (0..=level).chain(std::iter::once(special)).collect();
        let mut acc0 = vec![0u64; targets.len() * n];
        let mut acc1 = vec![0u64; targets.len() * n];
        let mut digit = vec![0u64; n];
        let mut lifted = vec![0u64; n];

        for i in 0..=level {
            digit.copy_from_slice(d.residues(i));
            ring.table(i).inverse(&mut digit);
            let mi = *ring.modulus(i);
            let (kb, ka) = &self.evk.digits[i];
            let (kb_s, ka_s) = &self.evk_shoup[i];
            for (slot, &t) in targets.iter().enumerate() {
                let mt = *ring.modulus(t);
                let src: &[u64] = if t == i {
                    d.residues(i)
                } else {
                    for (y, &x) in lifted.iter_mut().zip(&digit) {
                        *y = mi.lift_centered(x, &mt);
                    }
                    ring.table(t).forward(&mut lifted);
                    &lifted
                };
                let range = t * n..(t + 1) * n;
                let (kb, kb_s) = (&kb.data[range.clone()], &kb_s[range.clone()]);
                let (ka, ka_s) = (&ka.data[range.clone()], &ka_s[range]);
                let out0 = &mut acc0[slot * n..(slot + 1) * n];
                let out1 = &mut acc1[slot * n..(slot + 1) * n];
                for k in 0..n {
                    out0[k] = mt.add(out0[k], mt.mul_shoup(src[k], kb[k], kb_s[k]));
                    out1[k] = mt.add(out1[k], mt.mul_shoup(src[k], ka[k], ka_s[k]));
                }
            }
        }
        (acc0, acc1)
    }

    /// `round((P d + acc) / (P q_l))` for `d` over `q_0..q_l` and `acc`
    /// over `q_0..q_l, P`, all in NTT form.
    fn fused_down(&self, mut acc: Vec<u64>, d: &RingElement) -> RingElement {
        let ctx = &self.ctx;
        let ring = ctx.ring();
        let n = ctx.degree();
        let level = d.level();
        let special = ctx.special_index();
        let mp = *ring.modulus(special);
        let ml = *ring.modulus(level);
        let p = mp.value();
        let ql = ml.value();

        // the two residues being divided out, in coefficient form
        let mut top_p = acc[(level + 1) * n..].to_vec();
        ring.table(special).inverse(&mut top_p);
        let mut top_l = acc[level * n..(level + 1) * n].to_vec();
        let (pl, pl_s) = (ctx.special_mod(level), ml.shoup(ctx.special_mod(level)));
        for (x, &y) in top_l.iter_mut().zip(d.residues(level)) {
            *x = ml.add(*x, ml.mul_shoup(y, pl, pl_s));
        }
        ring.table(level).inverse(&mut top_l);

        // CRT: v = r_P + P ((r_l - r_P) P^{-1} mod q_l), centered mod P q_l
        let p_inv = ctx.special_inv(level);
        let p_inv_s = ml.shoup(p_inv);
        let modulus = p as u128 * ql as u128;
        let half = modulus / 2;
        let wide: Vec<u128> = top_p
            .iter()
            .zip(&top_l)
            .map(|(&rp, &rl)| {
                let t = ml.mul_shoup(ml.sub(rl, ml.reduce(rp)), p_inv, p_inv_s);
                rp as u128 + p as u128 * t as u128
            })
            .collect();

        let mut lifted = vec![0u64; n];
        for j in 0..level {
            let mj = *ring.modulus(j);
            let neg_m = mj.reduce_wide(modulus);
            for (y, &v) in lifted.iter_mut().zip(&wide) {
                let r = mj.reduce_wide(v);
                *y = if v > half { mj.sub(r, neg_m) } else { r };
            }
            ring.table(j).forward(&mut lifted);
            let pj = ctx.special_mod(j);
            let pj_s = mj.shoup(pj);
            let inv = mj.mul(ctx.special_inv(j), ctx.rescale_inv(level, j));
            let inv_s = mj.shoup(inv);
            let dj = d.residues(j);
            for ((x, &y), &dv) in acc[j * n..(j + 1) * n].iter_mut().zip(&lifted).zip(dj) {
                let full = mj.add(*x, mj.mul_shoup(dv, pj, pj_s));
                *x = mj.mul_shoup(mj.sub(full, y), inv, inv_s);
            }
        }
        acc.truncate(level * n);
        RingElement::from_raw_unchecked(ring, level - 1, Representation::Ntt, acc)
    }

    /// Divides an element over `q_0..q_l, P` by `P` with rounding.
    fn mod_down(&self, mut acc: Vec<u64>, level: usize) -> RingElement {
        let ctx = &self.ctx;
        let ring = ctx.ring();
        let n = ctx.degree();
        let special = ctx.special_index();
        let mp = *ring.modulus(special);
        let mut top = acc[(level + 1) * n..].to_vec();
        ring.table(special).inverse(&mut top);
        let mut lifted = vec![0u64; n];
        for j in 0..=level {
            let mj = *ring.modulus(j);
            for (y, &x) in lifted.iter_mut().zip(&top) {
                *y = mp.lift_centered(x, &mj);
            }
            ring.table(j).forward(&mut lifted);
            let inv = ctx.special_inv(j);
            let inv_s = mj.shoup(inv);
            for (x, &y) in acc[j * n..(j + 1) * n].iter_mut().zip(&lifted) {
                *x = mj.mul_shoup(mj.sub(*x, y), inv, inv_s);
            }
        }
        acc.truncate((level + 1) * n);
        RingElement::from_raw_unchecked(ring, level, Representation::Ntt, acc)
    }

    /// Divides an NTT-form element by its top prime with rounding.
    fn rescale_poly(&self, x: &RingElement) -> RingElement {
        let ctx = &self.ctx;
        let ring = ctx.ring();
        let n = ctx.degree();
        let level = x.level();
        let ml = *ring.modulus(level);
        let mut top = x.residues(level).to_vec();
        ring.table(level).inverse(&mut top);
        let mut data = x.raw()[..level * n].to_vec();
        let mut lifted = vec![0u64; n];
        for j in 0..level {
            let mj = *ring.modulus(j);
            for (y, &t) in lifted.iter_mut().zip(&top) {
                *y = ml.lift_centered(t, &mj);
            }
            ring.table(j).forward(&mut lifted);
            let inv = ctx.rescale_inv(level, j);
            let inv_s = mj.shoup(inv);
            for (v, &y) in data[j * n..(j + 1) * n].iter_mut().zip(&lifted) {
                *v = mj.mul_shoup(mj.sub(*v, y), inv, inv_s);
            }
        }
        RingElement::from_raw_unchecked(ring, level - 1, Representation::Ntt, data)
    }
}
