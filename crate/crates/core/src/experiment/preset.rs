//! Named encryption parameter sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ckks::{CkksParams, DEFAULT_SIGMA};
use crate::ring::{find_ntt_primes, RingParams, SearchDirection};
use crate::{Error, Result};

/// Depth of the desk chain when a circuit needs no more than two levels.
pub const DESK_MIN_DEPTH: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `N = 4096`, 40-bit scale; the chain is as deep as the circuit.
    Desk,
    /// `N = 8192`, 219-bit modulus, three levels.
    PaperTd0,
    /// `N = 16384`, 441-bit modulus, eight levels.
    PaperZ,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Desk, Preset::PaperTd0, Preset::PaperZ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::PaperTd0 => "paper-td0",
            Preset::PaperZ => "paper-z",
        }
    }

    /// Levels available to a circuit; `None` when the chain is sized to
    /// the circuit.
    pub fn depth_budget(self) -> Option<usize> {
        match self {
            Preset::Desk => None,
            Preset::PaperTd0 => Some(3),
            Preset::PaperZ => Some(8),
        }
    }

    /// Rejects circuits deeper than the chain.
    pub fn check_depth(self, needed: usize) -> Result<()> {
        match self.depth_budget() {
            Some(budget) if needed > budget => Err(Error::Config(format!(
                "preset {self} has a depth budget of {budget} but the circuit needs {needed}"
            ))),
            _ => Ok(()),
        }
    }

    /// Parameters for a circuit of depth `needed`.
    pub fn params(self, needed: usize) -> Result<CkksParams> {
        self.check_depth(needed)?;
        match self {
            Preset::Desk => CkksParams::generate(4096, 60, needed.max(DESK_MIN_DEPTH), 40, 60),
            Preset::PaperTd0 => {
                // the special prime must not be smaller than any rescale
                // prime, so it is taken first and the chain below it
                let n = 8192;
                let special = find_ntt_primes(40, n, 1, SearchDirection::Below, &[])[0];
                let rescale = find_ntt_primes(40, n, 3, SearchDirection::Below, &[special]);
                let mut chain = find_ntt_primes(59, n, 1, SearchDirection::Below, &[]);
                chain.extend(rescale);
                CkksParams::new(RingParams::new(n, chain, Some(special))?, 40.0, DEFAULT_SIGMA)
            }
            Preset::PaperZ => CkksParams::generate(16384, 60, 8, 40, 61),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset {s:?}")))
    }
}

/// One row of the preset table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    /// Circuits this row is built for.
    pub circuits: &'static str,
    pub degree: usize,
    pub modulus_bits: f64,
    pub log2_scale: f64,
    pub sigma: f64,
    pub depth_budget: usize,
}

impl PresetInfo {
    fn new(preset: Preset, circuits: &'static str, depth: usize) -> Result<Self> {
        let p = preset.params(depth)?;
        Ok(Self {
            name: preset.name(),
            circuits,
            degree: p.degree(),
            modulus_bits: p.ring().total_bits(),
            log2_scale: p.log2_scale(),
            sigma: p.sigma(),
            depth_budget: p.depth(),
        })
    }
}

/// Every preset; the desk preset appears once per chain length it is
/// built with.
pub fn list_presets() -> Result<Vec<PresetInfo>> {
    Ok(vec![
        PresetInfo::new(Preset::Desk, "td0, sarsa, value iteration", DESK_MIN_DEPTH)?,
        PresetInfo::new(Preset::Desk, "z (degree 5)", 4)?,
        PresetInfo::new(Preset::PaperTd0, "td0, sarsa, value iteration", 3)?,
        PresetInfo::new(Preset::PaperZ, "all", 8)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Rule;

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("paper".parse::<Preset>().is_err());
    }

    #[test]
    fn table_rows() {
        let rows = list_presets().unwrap();
        let td = rows.iter().find(|r| r.name == "paper-td0").unwrap();
        assert_eq!(td.degree, 8192);
        assert_eq!(td.modulus_bits.round(), 219.0);
        assert_eq!(td.depth_budget, 3);
        let z = rows.iter().find(|r| r.name == "paper-z").unwrap();
        assert_eq!(z.degree, 16384);
        assert_eq!(z.modulus_bits.round(), 441.0);
        assert_eq!(z.depth_budget, 8);
        for r in &rows {
            assert!((r.sigma - 8.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
            assert_eq!(r.log2_scale, 40.0);
        }
        let desk: Vec<_> = rows.iter().filter(|r| r.name == "desk").collect();
        assert_eq!(desk.len(), 2);
        assert!(desk.iter().all(|r| r.degree == 4096));
        assert_eq!(desk[0].depth_budget, 2);
        assert_eq!(desk[1].depth_budget, 4);
    }

    #[test]
    fn taylor_circuit_does_not_fit_the_td_preset() {
        let z = Rule::Z.depth(5);
        assert_eq!(z, 4);
        assert!(matches!(
            Preset::PaperTd0.params(z),
            Err(Error::Config(_))
        ));
        assert!(Preset::PaperTd0.params(Rule::Td0.depth(0)).is_ok());
        assert_eq!(Preset::Desk.params(z).unwrap().depth(), 4);
        assert_eq!(Preset::Desk.params(1).unwrap().depth(), 2);
    }
}
