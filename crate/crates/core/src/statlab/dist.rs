use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sampling::{pairwise_sum, uniform};

/// Normalization tolerance for probability vectors.
pub const NORM_TOL: f64 = 1e-12;

/// A finite probability vector.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dist {
    probabilities: Vec<f64>,
}

impl<'de> Deserialize<'de> for Dist {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            probabilities: Vec<f64>,
        }
        let raw = Raw::deserialize(d)?;
        Dist::new(raw.probabilities).map_err(serde::de::Error::custom)
    }
}

impl Dist {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if let Some(p) = probabilities.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("entry {p} is not a probability")));
        }
        let total = pairwise_sum(&probabilities);
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        Ok(Self { probabilities })
    }

    /// Scales non-negative weights to sum to one.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total = pairwise_sum(&weights);
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        Ok(Self { probabilities: vec![1.0 / k as f64; k] })
    }

    pub fn point_mass(k: usize, at: usize) -> Result<Self> {
        if at >= k {
            return Err(invalid(format!("atom {at} outside support of size {k}")));
        }
        let mut probabilities = vec![0.0; k];
        probabilities[at] = 1.0;
        Ok(Self { probabilities })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn into_probabilities(self) -> Vec<f64> {
        self.probabilities
    }

    pub fn get(&self, z: usize) -> f64 {
        self.probabilities[z]
    }

    pub fn max(&self) -> f64 {
        self.probabilities.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyKind {
    Shannon,
    Min,
}

/// Shannon or min-entropy in bits.
pub fn entropy(p: &Dist, kind: EntropyKind) -> f64 {
    match kind {
        EntropyKind::Shannon => shannon_bits(p.probabilities()),
        EntropyKind::Min => -p.max().log2(),
    }
}

pub(crate) fn shannon_bits(ps: &[f64]) -> f64 {
    let terms: Vec<f64> = ps.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).collect();
    // -0.0 for point masses
    pairwise_sum(&terms) + 0.0
}

/// Binary entropy in bits.
pub fn binary_entropy(x: f64) -> f64 {
    shannon_bits(&[x, 1.0 - x])
}

/// ε-smooth min-entropy over the total-variation ball around `p`.
///
/// The optimum caps the largest probabilities at a common level `c` such that
/// exactly `eps` mass is shaved off (and redistributed below the cap), with
/// `c ≥ 1/K` since a normalized distribution cannot sit entirely below `1/K`.
pub fn smooth_min_entropy(p: &Dist, eps: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) {
        return Err(invalid(format!("smoothing eps {eps} outside [0, 1)")));
    }
    let mut sorted = p.probabilities().to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = sorted.len();
    let floor = 1.0 / k as f64;
    // Find the smallest j such that capping the top j entries at
    // c_j = (sum_top_j - eps) / j gives c_j >= sorted[j].
    let mut prefix = 0.0;
    let mut cap = sorted[0];
    for j in 1..=k {
        prefix += sorted[j - 1];
        let c = (prefix - eps) / j as f64;
        let next = if j < k { sorted[j] } else { 0.0 };
        if c >= next {
            cap = c;
            break;
        }
    }
    let cap = cap.max(floor).min(sorted[0]);
    Ok(-cap.log2())
}

/// `Σ_z p(z)^2`.
pub fn collision_probability(p: &Dist) -> f64 {
    let sq: Vec<f64> = p.probabilities().iter().map(|x| x * x).collect();
    pairwise_sum(&sq)
}

/// Inverse-CDF sampler over a fixed distribution.
#[derive(Clone, Debug)]
pub struct CdfSampler {
    cdf: Vec<f64>,
}

impl CdfSampler {
    pub fn new(probabilities: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { cdf }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("non-empty");
        let u = uniform(rng) * total;
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.cdf.len() - 1)
    }
}
