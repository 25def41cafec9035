use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::devices::Response;
use crate::error::{invalid, Error, Result};
use crate::sampling::pairwise_sum;
use crate::simcore::{Circuit, OutputDistribution};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LxebScore {
    /// `(1/k) Σ p(z_i)`
    pub raw: f64,
    /// `N · raw`; about 2 for an ideal sampler and 1 for uniform noise.
    pub normalized: f64,
}

pub fn lxeb_score(p: &OutputDistribution, samples: &[u64]) -> Result<LxebScore> {
    if samples.is_empty() {
        return Err(invalid("no samples to score"));
    }
    let dim = p.dim() as u64;
    let mut probs = Vec::with_capacity(samples.len());
    for &z in samples {
        if z >= dim {
            return Err(Error::SampleOutOfRange { sample: z, n: p.n() });
        }
        probs.push(p.prob(z));
    }
    let raw = pairwise_sum(&probs) / samples.len() as f64;
    Ok(LxebScore { raw, normalized: raw * dim as f64 })
}

/// `lxeb_score ≥ b/N`.
pub fn lxeb_check(p: &OutputDistribution, samples: &[u64], b: f64) -> Result<bool> {
    Ok(lxeb_score(p, samples)?.raw >= b / p.dim() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DuplicateMode {
    /// No string may occur twice anywhere in the epoch.
    #[default]
    Strict,
    /// Only two identical responses count as a repeat.
    BatchIdentity,
}

/// True when the epoch's responses contain no repeats under `mode`.
pub fn duplicate_check(epoch: &[(&Circuit, &Response)], mode: DuplicateMode) -> Result<bool> {
    if let Some((first, _)) = epoch.first() {
        if epoch.iter().any(|(c, _)| c != first) {
            return Err(Error::MixedCircuits);
        }
    }
    Ok(match mode {
        DuplicateMode::Strict => {
            let mut seen = HashSet::new();
            epoch.iter().flat_map(|(_, r)| r.samples.iter()).all(|z| seen.insert(*z))
        }
        DuplicateMode::BatchIdentity => {
            let mut seen = HashSet::new();
            epoch.iter().all(|(_, r)| seen.insert(r.samples.as_slice()))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prf::Key32;
    use crate::simcore::Ensemble;

    fn uniform(n: u32) -> OutputDistribution {
        OutputDistribution::new(n, vec![1.0 / (1u64 << n) as f64; 1 << n]).unwrap()
    }

    #[test]
    fn uniform_scores() {
        let p = uniform(4);
        let s = lxeb_score(&p, &[0, 3, 15]).unwrap();
        assert_eq!(s.raw, 1.0 / 16.0);
        assert_eq!(s.normalized, 1.0);
        assert!(lxeb_check(&p, &[1, 2], 1.0).unwrap());
        assert!(!lxeb_check(&p, &[1, 2], 1.5).unwrap());
    }

    #[test]
    fn point_mass_scores() {
        let mut v = vec![0.0; 8];
        v[0] = 1.0;
        let p = OutputDistribution::new(3, v).unwrap();
        let s = lxeb_score(&p, &[0, 0, 0]).unwrap();
        assert_eq!((s.raw, s.normalized), (1.0, 8.0));
    }

    #[test]
    fn scoring_errors() {
        let p = uniform(3);
        assert!(lxeb_score(&p, &[]).is_err());
        assert!(matches!(lxeb_score(&p, &[8]), Err(Error::SampleOutOfRange { .. })));
    }

    #[test]
    fn duplicate_modes() {
        let c = Circuit::new(Ensemble::HaarColumn, 4, Key32::filled(0), None).unwrap();
        let r = |s: &[u64]| Response { round: 0, samples: s.to_vec() };
        let (a, b, same, shared) = (r(&[1, 2]), r(&[3, 4]), r(&[1, 2]), r(&[2, 5]));
        for mode in [DuplicateMode::Strict, DuplicateMode::BatchIdentity] {
            assert!(duplicate_check(&[(&c, &a), (&c, &b)], mode).unwrap());
            assert!(!duplicate_check(&[(&c, &a), (&c, &same)], mode).unwrap());
        }
        assert!(!duplicate_check(&[(&c, &a), (&c, &shared)], DuplicateMode::Strict).unwrap());
        assert!(duplicate_check(&[(&c, &a), (&c, &shared)], DuplicateMode::BatchIdentity).unwrap());
        let other = Circuit::new(Ensemble::HaarColumn, 4, Key32::filled(1), None).unwrap();
        assert!(matches!(duplicate_check(&[(&c, &a), (&other, &b)], DuplicateMode::Strict), Err(Error::MixedCircuits)));
    }
}
