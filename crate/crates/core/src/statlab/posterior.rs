use crate::error::{invalid, Error, Result};

/// Posterior mean of `P ~ Dir(1^N)` after observing the frequency vector
/// `freq` of `k` samples: entry `z` is `(m_z + 1) / (N + k)`.
pub fn posterior_mean(freq: &[i64], n: usize, k: u64) -> Result<Vec<f64>> {
    if freq.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: freq.len() });
    }
    if let Some(m) = freq.iter().find(|&&m| m < 0) {
        return Err(invalid(format!("negative count {m}")));
    }
    let total: i64 = freq.iter().sum();
    if total as u64 != k {
        return Err(invalid(format!("counts sum to {total}, expected {k}")));
    }
    let denom = (n as u64 + k) as f64;
    Ok(freq.iter().map(|&m| (m as f64 + 1.0) / denom).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_mean() {
        assert_eq!(posterior_mean(&[0; 4], 4, 0).unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn single_observation() {
        assert_eq!(posterior_mean(&[1, 0, 0, 0], 4, 1).unwrap(), vec![0.4, 0.2, 0.2, 0.2]);
    }

    #[test]
    fn double_observation() {
        let got = posterior_mean(&[2, 0, 0, 0], 4, 2).unwrap();
        let want = [3.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        assert_eq!(got, want);
    }

    #[test]
    fn numerators_sum_to_denominator() {
        // Σ (m_z + 1) = N + k exactly, so the rational entries sum to one.
        for (freq, k) in [(vec![0i64, 0, 0], 0u64), (vec![3, 1, 0, 2], 6), (vec![0, 9], 9)] {
            let numer: i64 = freq.iter().map(|m| m + 1).sum();
            assert_eq!(numer as u64, freq.len() as u64 + k);
            let p = posterior_mean(&freq, freq.len(), k).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn errors() {
        assert!(posterior_mean(&[-1, 1], 2, 0).is_err());
        assert!(posterior_mean(&[1, 1], 2, 3).is_err());
        assert!(posterior_mean(&[1, 1], 3, 2).is_err());
    }
}
