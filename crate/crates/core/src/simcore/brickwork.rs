//! Dense statevector simulation of brickwork circuits built from Haar-random
//! two-qubit gates.

use num_complex::Complex64;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::sampling::gaussian_pair;

/// A 4×4 unitary acting on a neighbouring pair `(q, q + 1)`. Row/column index
/// is `bit_q | bit_{q+1} << 1`.
pub type Gate4 = [[Complex64; 4]; 4];

pub fn identity_gate() -> Gate4 {
    let mut g = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (i, row) in g.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    g
}

/// Haar-random 4×4 unitary: Gram–Schmidt on the columns of a complex Ginibre
/// matrix. The implied R factor has a positive real diagonal, which is the
/// phase convention under which Q is exactly Haar distributed.
pub fn haar_gate<R: RngCore + ?Sized>(rng: &mut R) -> Gate4 {
    let mut cols = [[Complex64::new(0.0, 0.0); 4]; 4];
    for col in cols.iter_mut() {
        for z in col.iter_mut() {
            let (re, im) = gaussian_pair(rng);
            *z = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
        }
    }
    for j in 0..4 {
        for i in 0..j {
            let proj: Complex64 = (0..4).map(|r| cols[i][r].conj() * cols[j][r]).sum();
            for r in 0..4 {
                let sub = proj * cols[i][r];
                cols[j][r] -= sub;
            }
        }
        let norm = libm::sqrt(cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>());
        for z in cols[j].iter_mut() {
            *z /= norm;
        }
    }
    let mut g = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (r, row) in g.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            *entry = cols[c][r];
        }
    }
    g
}

/// An explicit brickwork circuit: `layers[l]` lists `(q, gate)` with the gate on
/// qubits `q, q + 1`.
#[derive(Clone, Debug)]
pub struct BrickworkCircuit {
    pub n: u32,
    pub layers: Vec<Vec<(u32, Gate4)>>,
}

/// Lower qubit of each pair in layer `layer`: even layers start at 0, odd at 1.
pub fn layer_pairs(n: u32, layer: usize) -> impl Iterator<Item = u32> {
    let start = (layer % 2) as u32;
    (start..n.saturating_sub(1)).step_by(2)
}

impl BrickworkCircuit {
    /// Draws every gate, layer by layer and pair by pair, from `rng`.
    pub fn random<R: RngCore + ?Sized>(n: u32, depth: u32, rng: &mut R) -> Self {
        let layers = (0..depth as usize)
            .map(|l| layer_pairs(n, l).map(|q| (q, haar_gate(rng))).collect())
            .collect();
        Self { n, layers }
    }

    pub fn identity(n: u32, depth: u32) -> Self {
        let layers = (0..depth as usize)
            .map(|l| layer_pairs(n, l).map(|q| (q, identity_gate())).collect())
            .collect();
        Self { n, layers }
    }

    /// Runs the circuit on `|0^n⟩` and returns the final statevector.
    pub fn simulate(&self) -> Result<Vec<Complex64>> {
        let dim = 1usize << self.n;
        let mut state = vec![Complex64::new(0.0, 0.0); dim];
        state[0] = Complex64::new(1.0, 0.0);
        for layer in &self.layers {
            for (q, gate) in layer {
                apply_pair(&mut state, *q, gate);
            }
            let norm: f64 = state.iter().map(|z| z.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidDistribution(format!("statevector norm drifted to {norm}")));
            }
        }
        Ok(state)
    }
}

fn apply_pair(state: &mut [Complex64], q: u32, gate: &Gate4) {
    let lo = 1usize << q;
    let hi = 1usize << (q + 1);
    for base in 0..state.len() {
        if base & (lo | hi) != 0 {
            continue;
        }
        let idx = [base, base | lo, base | hi, base | lo | hi];
        let amp = [state[idx[0]], state[idx[1]], state[idx[2]], state[idx[3]]];
        for (r, &target) in idx.iter().enumerate() {
            let row = &gate[r];
            state[target] = row[0] * amp[0] + row[1] * amp[1] + row[2] * amp[2] + row[3] * amp[3];
        }
    }
}
