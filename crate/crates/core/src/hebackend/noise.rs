use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How injected perturbations `w` with `|w| <= ε` are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// `w` uniform on `[-ε, ε]`.
    Uniform,
    /// `w = +ε` every time.
    Adversarial,
}

impl std::str::FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(NoiseMode::Uniform),
            "adversarial" => Ok(NoiseMode::Adversarial),
            other => Err(Error::Config(format!("unknown noise mode {other:?}"))),
        }
    }
}

/// Seeded source of bounded perturbations.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    eps: f64,
    mode: NoiseMode,
    rng: ChaCha8Rng,
}

impl NoiseModel {
    pub fn new(eps: f64, mode: NoiseMode, seed: u64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidNoise(eps));
        }
        Ok(Self {
            eps,
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    pub fn draw(&mut self) -> f64 {
        match self.mode {
            NoiseMode::Adversarial => self.eps,
            NoiseMode::Uniform if self.eps == 0.0 => 0.0,
            NoiseMode::Uniform => self.rng.gen_range(-self.eps..=self.eps),
        }
    }

    /// Adds one draw to `x`; the identity when `ε = 0`.
    pub fn perturb(&mut self, x: f64) -> f64 {
        if self.eps == 0.0 {
            x
        } else {
            x + self.draw()
        }
    }
}
