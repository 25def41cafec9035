use rand::RngCore;

use crate::error::{invalid, Result};
use crate::sampling::exponential;
use crate::statlab::dist::Dist;

/// Draws `P ~ Dir(1^N)` as N i.i.d. Exponential(1) variables divided by their sum.
pub fn sample_dirichlet<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Result<Dist> {
    if n < 2 {
        return Err(invalid(format!("Dirichlet dimension {n} < 2")));
    }
    let weights: Vec<f64> = (0..n).map(|_| exponential(rng)).collect();
    Dist::from_weights(weights)
}

/// Dirichlet(1^N) conditioned on observed counts, i.e. Dir(1^N + m), via
/// Gamma(m_z + 1) = sum of m_z + 1 exponentials.
pub fn sample_dirichlet_posterior<R: RngCore + ?Sized>(counts: &[u64], rng: &mut R) -> Result<Dist> {
    if counts.len() < 2 {
        return Err(invalid("posterior needs at least two categories"));
    }
    let weights: Vec<f64> =
        counts.iter().map(|&m| (0..=m).map(|_| exponential(rng)).sum::<f64>()).collect();
    Dist::from_weights(weights)
}
