//! Seeded challenge circuits and their exact output distributions.

pub mod brickwork;
pub mod circuit;
pub mod fwht;

use num_complex::Complex64;
use rand::RngCore;

pub use brickwork::BrickworkCircuit;
pub use circuit::{derive_circuit, Circuit, Ensemble};
pub use fwht::walsh_hadamard_transform;

use crate::error::{Error, Result};
use crate::prf::PrfRng;
use crate::sampling::{gaussian_pair, pairwise_sum};
use crate::statlab::dist::{CdfSampler, Dist};

/// Exact output distribution `p_C` over `N = 2^n` bitstrings. Index `z` is the
/// bitstring whose most significant bit is qubit `n - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputDistribution {
    n: u32,
    dist: Dist,
}

impl OutputDistribution {
    pub fn new(n: u32, probabilities: Vec<f64>) -> Result<Self> {
        let expected = 1usize
            .checked_shl(n)
            .ok_or_else(|| Error::InvalidParameter(format!("n = {n} too large")))?;
        if probabilities.len() != expected {
            return Err(Error::LengthMismatch { expected, actual: probabilities.len() });
        }
        Ok(Self { n, dist: Dist::new(probabilities)? })
    }

    /// Renormalizes non-negative weights (statevector round-off) before validating.
    fn from_weights(n: u32, weights: Vec<f64>) -> Result<Self> {
        let dist = Dist::from_weights(weights)?;
        Self::new(n, dist.into_probabilities())
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dist.len()
    }

    pub fn prob(&self, z: u64) -> f64 {
        self.dist.get(z as usize)
    }

    pub fn probabilities(&self) -> &[f64] {
        self.dist.probabilities()
    }

    pub fn as_dist(&self) -> &Dist {
        &self.dist
    }

    pub fn sampler(&self) -> CdfSampler {
        CdfSampler::new(self.probabilities())
    }
}

/// Configurable memory guard for expansion.
#[derive(Clone, Copy, Debug)]
pub struct SimLimits {
    pub max_dense_qubits: u32,
    pub max_brickwork_qubits: u32,
}

impl Default for SimLimits {
    fn default() -> Self {
        Self {
            max_dense_qubits: Ensemble::HaarColumn.max_qubits(),
            max_brickwork_qubits: Ensemble::Brickwork.max_qubits(),
        }
    }
}

const HAAR_LABEL: &[u8] = b"haar-column";
const BRICKWORK_LABEL: &[u8] = b"brickwork";
const FOURIER_LABEL: &[u8] = b"fourier";

pub fn output_distribution(circuit: &Circuit) -> Result<OutputDistribution> {
    output_distribution_with_limits(circuit, SimLimits::default())
}

pub fn output_distribution_with_limits(circuit: &Circuit, limits: SimLimits) -> Result<OutputDistribution> {
    circuit.validate()?;
    let limit = match circuit.ensemble {
        Ensemble::Brickwork => limits.max_brickwork_qubits,
        _ => limits.max_dense_qubits,
    };
    if circuit.n > limit {
        return Err(Error::MemoryGuard(format!(
            "{} circuit on {} qubits exceeds configured limit {limit}",
            circuit.ensemble, circuit.n
        )));
    }
    match circuit.ensemble {
        Ensemble::HaarColumn => haar_column(circuit),
        Ensemble::Brickwork => {
            let mut rng = PrfRng::new(&circuit.seed, BRICKWORK_LABEL);
            let depth = circuit.depth.expect("validated");
            let bw = BrickworkCircuit::random(circuit.n, depth, &mut rng);
            statevector_distribution(circuit.n, &bw.simulate()?)
        }
        Ensemble::Fourier => {
            let mut rng = PrfRng::new(&circuit.seed, FOURIER_LABEL);
            let table = random_boolean_table(circuit.dim(), &mut rng);
            fourier_distribution(circuit.n, &table)
        }
    }
}

fn haar_column(circuit: &Circuit) -> Result<OutputDistribution> {
    let mut rng = PrfRng::new(&circuit.seed, HAAR_LABEL);
    let weights: Vec<f64> = (0..circuit.dim())
        .map(|_| {
            let (re, im) = gaussian_pair(&mut rng);
            re * re + im * im
        })
        .collect();
    OutputDistribution::from_weights(circuit.n, weights)
}

/// `f: {0,1}^n -> {±1}` from one random bit per input.
pub fn random_boolean_table<R: RngCore + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    let mut table = Vec::with_capacity(dim);
    while table.len() < dim {
        let word = rng.next_u64();
        for bit in 0..64.min(dim - table.len()) {
            table.push(if (word >> bit) & 1 == 0 { 1.0 } else { -1.0 });
        }
    }
    table
}

/// Squared Fourier coefficients of a ±1 truth table.
pub fn fourier_distribution(n: u32, table: &[f64]) -> Result<OutputDistribution> {
    let hat = walsh_hadamard_transform(table)?;
    let weights: Vec<f64> = hat.iter().map(|v| v * v).collect();
    let total = pairwise_sum(&weights);
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("truth table entries must be ±1".into()));
    }
    OutputDistribution::from_weights(n, weights)
}

pub fn statevector_distribution(n: u32, state: &[Complex64]) -> Result<OutputDistribution> {
    OutputDistribution::from_weights(n, state.iter().map(|z| z.norm_sqr()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prf::Key32;
    use crate::statlab::dist::collision_probability;

    #[test]
    fn identity_brickwork_is_point_mass() {
        let bw = BrickworkCircuit::identity(4, 5);
        let p = statevector_distribution(4, &bw.simulate().unwrap()).unwrap();
        assert_eq!(p.prob(0), 1.0);
    }

    #[test]
    fn constant_boolean_function() {
        let p = fourier_distribution(3, &[1.0; 8]).unwrap();
        assert_eq!(p.prob(0), 1.0);
    }

    #[test]
    fn every_ensemble_is_replayable() {
        let k = Key32::filled(4);
        for e in Ensemble::ALL {
            let depth = (e == Ensemble::Brickwork).then_some(6);
            let c = derive_circuit(&k, 3, e, 6, depth).unwrap();
            let a = output_distribution(&c).unwrap();
            let b = output_distribution(&c).unwrap();
            assert_eq!(a.probabilities(), b.probabilities());
            assert_eq!(a.dim(), 64);
        }
    }

    #[test]
    fn memory_guard() {
        let c = Circuit::new(Ensemble::HaarColumn, 12, Key32::filled(0), None).unwrap();
        let limits = SimLimits { max_dense_qubits: 10, ..SimLimits::default() };
        assert!(matches!(output_distribution_with_limits(&c, limits), Err(Error::MemoryGuard(_))));
    }

    #[test]
    fn haar_collision_mean() {
        // E[Σ p²] = 2/(N+1) for Dirichlet(1^N); 3 standard errors.
        let k = Key32::filled(8);
        let n = 8;
        let s: Vec<f64> = (0..2000)
            .map(|e| {
                let c = derive_circuit(&k, e, Ensemble::HaarColumn, n, None).unwrap();
                collision_probability(output_distribution(&c).unwrap().as_dist())
            })
            .collect();
        let (mean, se) = crate::sampling::mean_and_se(&s);
        let target = 2.0 / 257.0;
        assert!((mean - target).abs() <= 3.0 * se, "mean {mean} target {target} se {se}");
    }

    #[test]
    fn brickwork_mixes_away_from_ground_state() {
        let c = derive_circuit(&Key32::filled(2), 0, Ensemble::Brickwork, 6, Some(12)).unwrap();
        let p = output_distribution(&c).unwrap();
        assert!(p.prob(0) < 0.5);
    }
}
