use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::prf::{derive_key, Key32};

/// Domain label for challenge-circuit seeds.
pub const CIRCUIT_LABEL: &[u8] = b"certrand/circuit";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    /// First column of a Haar unitary: `p_C` is Dirichlet(1, ..., 1).
    HaarColumn,
    /// Alternating layers of Haar-random two-qubit gates on neighbours.
    Brickwork,
    /// Fourier sampling of a seeded Boolean function.
    Fourier,
}

impl Ensemble {
    pub const ALL: [Ensemble; 3] = [Ensemble::HaarColumn, Ensemble::Brickwork, Ensemble::Fourier];

    pub fn as_str(self) -> &'static str {
        match self {
            Ensemble::HaarColumn => "haar-column",
            Ensemble::Brickwork => "brickwork",
            Ensemble::Fourier => "fourier",
        }
    }

    /// Largest qubit count expandable for this ensemble.
    pub fn max_qubits(self) -> u32 {
        match self {
            Ensemble::HaarColumn | Ensemble::Fourier => 24,
            Ensemble::Brickwork => 20,
        }
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar-column" => Ok(Ensemble::HaarColumn),
            "brickwork" => Ok(Ensemble::Brickwork),
            "fourier" => Ok(Ensemble::Fourier),
            other => Err(invalid(format!("unknown ensemble {other:?}"))),
        }
    }
}

/// A seeded challenge circuit. Everything about it, including its exact
/// output distribution, is a function of these four fields.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Circuit {
    pub ensemble: Ensemble,
    pub n: u32,
    pub seed: Key32,
    pub depth: Option<u32>,
}

impl Circuit {
    pub fn new(ensemble: Ensemble, n: u32, seed: Key32, depth: Option<u32>) -> Result<Self> {
        let c = Self { ensemble, n, seed, depth };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let max = self.ensemble.max_qubits();
        if self.n < 2 || self.n > max {
            return Err(Error::UnsupportedQubits {
                ensemble: self.ensemble.to_string(),
                n: self.n,
                min: 2,
                max,
            });
        }
        match (self.ensemble, self.depth) {
            (Ensemble::Brickwork, None) => Err(invalid("brickwork circuits need a depth")),
            (Ensemble::Brickwork, Some(0)) => Err(invalid("brickwork depth must be at least 1")),
            (Ensemble::Brickwork, Some(_)) => Ok(()),
            (e, Some(_)) => Err(invalid(format!("depth is only meaningful for brickwork, not {e}"))),
            (_, None) => Ok(()),
        }
    }

    /// Number of outcomes `N = 2^n`.
    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    /// Canonical JSON encoding.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("circuit serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Circuit = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }
}

/// Derives the challenge for `epoch_index` from `master_key`.
///
/// The seed is the PRF output under [`CIRCUIT_LABEL`] at counter `epoch_index`.
pub fn derive_circuit(
    master_key: &Key32,
    epoch_index: u64,
    ensemble: Ensemble,
    n: u32,
    depth: Option<u32>,
) -> Result<Circuit> {
    let seed = derive_key(master_key, CIRCUIT_LABEL, epoch_index);
    Circuit::new(ensemble, n, seed, depth)
}
