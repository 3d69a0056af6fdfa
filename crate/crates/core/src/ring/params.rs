use std::sync::Arc;

use super::modulus::Modulus;
use super::ntt::NttTable;
use super::prime::{find_ntt_primes, is_prime, SearchDirection};
use crate::{Error, Result};

/// Ring degree plus the RNS modulus chain `q_0, ..., q_L` and an optional
/// special prime used only inside key switching.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RingParams {
    degree: usize,
    chain: Vec<u64>,
    special: Option<u64>,
}

impl RingParams {
    pub fn new(degree: usize, chain: Vec<u64>, special: Option<u64>) -> Result<Self> {
        if !degree.is_power_of_two() || degree < 2 {
            return Err(Error::InvalidParams(format!(
                "degree {degree} is not a power of two"
            )));
        }
        if chain.is_empty() {
            return Err(Error::InvalidParams("empty modulus chain".into()));
        }
        let two_n = 2 * degree as u64;
        let all: Vec<u64> = chain.iter().copied().chain(special).collect();
        for (i, &q) in all.iter().enumerate() {
            if 64 - q.leading_zeros() > super::modulus::MAX_MODULUS_BITS {
                return Err(Error::InvalidParams(format!(
                    "prime {q} wider than 62 bits"
                )));
            }
            if !is_prime(q) {
                return Err(Error::InvalidParams(format!("{q} is not prime")));
            }
            if q % two_n != 1 {
                return Err(Error::InvalidParams(format!("{q} is not 1 mod 2N")));
            }
            if all[..i].contains(&q) {
                return Err(Error::InvalidParams(format!("prime {q} repeated")));
            }
        }
        Ok(Self {
            degree,
            chain,
            special,
        })
    }

    /// Deterministic chain: a `base_bits` prime below `2^base_bits`, one
    /// prime per entry of `rescale_bits` as close to its power of two as
    /// possible, and a special prime below `2^special_bits`.
    pub fn generate(
        degree: usize,
        base_bits: u32,
        rescale_bits: &[u32],
        special_bits: Option<u32>,
    ) -> Result<Self> {
        let mut chain = find_ntt_primes(base_bits, degree, 1, SearchDirection::Below, &[]);
        for &bits in rescale_bits {
            let p = find_ntt_primes(bits, degree, 1, SearchDirection::Nearest, &chain)[0];
            chain.push(p);
        }
        let special = special_bits
            .map(|bits| find_ntt_primes(bits, degree, 1, SearchDirection::Below, &chain)[0]);
        Self::new(degree, chain, special)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn chain(&self) -> &[u64] {
        &self.chain
    }

    pub fn special(&self) -> Option<u64> {
        self.special
    }

    /// Highest level index `L`; level `l` uses primes `q_0..=q_l`.
    pub fn max_level(&self) -> usize {
        self.chain.len() - 1
    }

    /// Sum of `log2` over every prime, special prime included.
    pub fn total_bits(&self) -> f64 {
        self.chain
            .iter()
            .chain(self.special.iter())
            .map(|&q| (q as f64).log2())
            .sum()
    }

    /// `log2` of the cumulative modulus `Q_l = q_0 * ... * q_l`.
    pub fn log2_modulus(&self, level: usize) -> f64 {
        self.chain[..=level]
            .iter()
            .map(|&q| (q as f64).log2())
            .sum()
    }
}

/// Parameters with precomputed per-prime tables; shared by every element.
#[derive(Debug)]
pub struct RingContext {
    params: RingParams,
    // chain tables followed by the special prime's table, if any
    tables: Vec<NttTable>,
}

impl RingContext {
    pub fn new(params: RingParams) -> Arc<Self> {
        let n = params.degree;
        let tables = params
            .chain
            .iter()
            .chain(params.special.iter())
            .map(|&q| NttTable::new(Modulus::new(q), n))
            .collect();
        Arc::new(Self { params, tables })
    }

    pub fn params(&self) -> &RingParams {
        &self.params
    }

    pub fn degree(&self) -> usize {
        self.params.degree
    }

    pub fn max_level(&self) -> usize {
        self.params.max_level()
    }

    /// Table for chain prime `i`, or the special prime when `i == L + 1`.
    pub fn table(&self, i: usize) -> &NttTable {
        &self.tables[i]
    }

    pub fn modulus(&self, i: usize) -> &Modulus {
        self.tables[i].modulus()
    }

    pub fn special_index(&self) -> Option<usize> {
        self.params.special.map(|_| self.params.chain.len())
    }
}
