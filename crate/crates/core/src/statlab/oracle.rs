//! Monte-Carlo checks of the Dirichlet/Haar facts the protocols rely on.
//!
//! Each registered lemma pairs a simulation with a closed-form prediction or a
//! one-sided bound. Two-sided checks pass within three standard errors.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Error, Result};
use crate::prf::{Key32, PrfRng};
use crate::reductions::{gs_gap_experiment, GsParams};
use crate::sampling::{gaussian_pair, mean_and_se, pairwise_sum};
use crate::statlab::dirichlet::sample_dirichlet;
use crate::statlab::dist::{collision_probability, CdfSampler};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaId {
    HaarMin,
    HaarMinAvg,
    Completeness,
    CollisionConcentration,
    LxebPerfect,
    LxebProduct,
    FreqDist,
    SemiHonestBasis,
    GoldwasserSipser,
}

impl LemmaId {
    pub const ALL: [LemmaId; 9] = [
        LemmaId::HaarMin,
        LemmaId::HaarMinAvg,
        LemmaId::Completeness,
        LemmaId::CollisionConcentration,
        LemmaId::LxebPerfect,
        LemmaId::LxebProduct,
        LemmaId::FreqDist,
        LemmaId::SemiHonestBasis,
        LemmaId::GoldwasserSipser,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LemmaId::HaarMin => "haar-min",
            LemmaId::HaarMinAvg => "haar-min-avg",
            LemmaId::Completeness => "completeness",
            LemmaId::CollisionConcentration => "collision-concentration",
            LemmaId::LxebPerfect => "lxeb-perfect",
            LemmaId::LxebProduct => "lxeb-product",
            LemmaId::FreqDist => "freq-dist",
            LemmaId::SemiHonestBasis => "semi-honest-basis",
            LemmaId::GoldwasserSipser => "goldwasser-sipser",
        }
    }
}

impl fmt::Display for LemmaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LemmaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LemmaId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::UnknownLemma(s.to_string()))
    }
}

/// How `empirical` is compared with `predicted`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// `|empirical - predicted| <= tolerance`
    TwoSided,
    /// `empirical >= predicted - tolerance`
    AtLeast,
    /// `empirical <= predicted + tolerance`
    AtMost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub lemma_id: String,
    pub trials: u64,
    pub empirical: f64,
    pub predicted: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(
        lemma_id: impl Into<String>,
        trials: u64,
        empirical: f64,
        predicted: f64,
        tolerance: f64,
        comparison: Comparison,
    ) -> Self {
        let pass = match comparison {
            Comparison::TwoSided => (empirical - predicted).abs() <= tolerance,
            Comparison::AtLeast => empirical >= predicted - tolerance,
            Comparison::AtMost => empirical <= predicted + tolerance,
        };
        Self { lemma_id: lemma_id.into(), trials, empirical, predicted, tolerance, comparison, pass }
    }
}

/// Parameters shared by the registered checks; each lemma reads what it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleParams {
    /// Outcome count `N`.
    pub dim: usize,
    /// Samples per circuit (lxeb-*, freq-dist).
    pub k: usize,
    /// Basis index `i` for semi-honest-basis.
    pub index: usize,
    /// Circuits per trial for lxeb-product.
    pub rounds: usize,
    /// Set size κ, gap ε and slack α for goldwasser-sipser.
    pub kappa: u64,
    pub eps: f64,
    pub alpha: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self { dim: 256, k: 2, index: 1, rounds: 8, kappa: 8, eps: 0.5, alpha: 1.0 }
    }
}

/// Runs `trials` independent trials in parallel. Trial `t` uses sub-stream `t`
/// of `label` under `seed`, and results come back in trial order so the
/// reduction is deterministic.
pub(crate) fn par_trials<T, F>(seed: &Key32, label: &str, trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut PrfRng) -> T + Sync + Send,
{
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = PrfRng::substream(seed, label, t);
            f(&mut rng)
        })
        .collect()
}

fn log2_dim(dim: usize) -> f64 {
    (dim as f64).log2()
}

pub fn oracle_check(lemma: LemmaId, params: &OracleParams, trials: u64, seed: &Key32) -> Result<OracleReport> {
    if trials < 2 {
        return Err(invalid("need at least two trials"));
    }
    let n_out = params.dim;
    if lemma != LemmaId::GoldwasserSipser && n_out < 2 {
        return Err(invalid(format!("dimension {n_out} < 2")));
    }
    let nf = n_out as f64;
    let label = lemma.as_str();
    let report = match lemma {
        LemmaId::HaarMin => {
            let cut = 4.0 * nf.ln() / nf;
            let hits = par_trials(seed, label, trials, |rng| {
                let p = sample_dirichlet(n_out, rng).expect("dim >= 2");
                if p.max() <= cut { 1.0 } else { 0.0 }
            });
            let rate = pairwise_sum(&hits) / trials as f64;
            OracleReport::new(label, trials, rate, 1.0 - 6.0 / nf, 0.0, Comparison::AtLeast)
        }
        LemmaId::HaarMinAvg => {
            let maxes = par_trials(seed, label, trials, |rng| sample_dirichlet(n_out, rng).expect("dim >= 2").max());
            let (mean, _) = mean_and_se(&maxes);
            OracleReport::new(label, trials, mean, (2.0 * nf.ln() + 7.0) / nf, 0.0, Comparison::AtMost)
        }
        LemmaId::Completeness => {
            let scores = par_trials(seed, label, trials, |rng| {
                let p = sample_dirichlet(n_out, rng).expect("dim >= 2");
                let z = CdfSampler::new(p.probabilities()).sample(rng);
                p.get(z)
            });
            let (mean, se) = mean_and_se(&scores);
            OracleReport::new(label, trials, mean, 2.0 / (nf + 1.0), 3.0 * se, Comparison::TwoSided)
        }
        LemmaId::CollisionConcentration => {
            let s = par_trials(seed, label, trials, |rng| {
                collision_probability(&sample_dirichlet(n_out, rng).expect("dim >= 2"))
            });
            let (mean, _) = mean_and_se(&s);
            let dev: Vec<f64> = s.iter().map(|x| (x - mean) * (x - mean)).collect();
            let var = pairwise_sum(&dev) / (trials as f64 - 1.0);
            let predicted = collision_variance(nf);
            OracleReport::new(label, trials, var, predicted, 0.1 * predicted, Comparison::TwoSided)
        }
        LemmaId::LxebPerfect => {
            let k = params.k.max(1);
            let hits = par_trials(seed, label, trials, |rng| if lxeb_batch_passes(n_out, k, rng) { 1.0 } else { 0.0 });
            let rate = pairwise_sum(&hits) / trials as f64;
            OracleReport::new(label, trials, rate, lxeb_perfect_bound(n_out, k), 0.0, Comparison::AtLeast)
        }
        LemmaId::LxebProduct => {
            let k = params.k.max(1);
            let rounds = params.rounds.max(1);
            let hits = par_trials(seed, label, trials, |rng| {
                let passed = (0..rounds).filter(|_| lxeb_batch_passes(n_out, k, rng)).count();
                if passed as f64 >= 0.99 * rounds as f64 { 1.0 } else { 0.0 }
            });
            let rate = pairwise_sum(&hits) / trials as f64;
            let mu = lxeb_perfect_bound(n_out, k);
            let predicted = if mu > 0.99 {
                1.0 - (-2.0 * rounds as f64 * (mu - 0.99) * (mu - 0.99)).exp()
            } else {
                0.0
            };
            OracleReport::new(label, trials, rate, predicted, 0.0, Comparison::AtLeast)
        }
        LemmaId::FreqDist => freq_dist_check(n_out, params.k, trials, seed)?,
        LemmaId::SemiHonestBasis => {
            if params.index >= n_out {
                return Err(invalid(format!("basis index {} outside [0, {n_out})", params.index)));
            }
            let i = params.index;
            let scores = par_trials(seed, label, trials, |rng| {
                let (c0, ci) = haar_columns(n_out, i, rng);
                c0.iter().zip(&ci).map(|(a, b)| a.norm_sqr() * b.norm_sqr()).sum::<f64>()
            });
            let (mean, se) = mean_and_se(&scores);
            let predicted = (1.0 + if i == 0 { 1.0 } else { 0.0 }) / (nf + 1.0);
            OracleReport::new(label, trials, mean, predicted, 3.0 * se, Comparison::TwoSided)
        }
        LemmaId::GoldwasserSipser => {
            let gs = GsParams { kappa: params.kappa, eps: params.eps, alpha: params.alpha, universe: 1 << 30 };
            let r = gs_gap_experiment(&gs, trials, seed)?;
            let predicted = params.eps * params.eps / (4.0 * params.alpha);
            OracleReport::new(label, trials, r.gap, 0.8 * predicted, 0.0, Comparison::AtLeast)
        }
    };
    Ok(report)
}

/// `Var[Σ_z P_z²]` for `P ~ Dir(1^N)`.
pub fn collision_variance(n: f64) -> f64 {
    4.0 * (n - 1.0) / ((n + 1.0) * (n + 1.0) * (n + 2.0) * (n + 3.0))
}

fn lxeb_batch_passes(n_out: usize, k: usize, rng: &mut PrfRng) -> bool {
    let p = sample_dirichlet(n_out, rng).expect("dim >= 2");
    let sampler = CdfSampler::new(p.probabilities());
    let scores: Vec<f64> = (0..k).map(|_| p.get(sampler.sample(rng))).collect();
    pairwise_sum(&scores) / k as f64 >= 1.98 / (n_out as f64 + 1.0)
}

/// Lower bound on `Pr[batch mean ≥ 1.98/(N+1)]` implied by the Hoeffding and
/// Chebyshev steps: bad circuits (max too large or collision probability off by
/// more than 0.01/(N+1)) are charged in full. Vacuous (zero) at small sizes.
pub fn lxeb_perfect_bound(n_out: usize, k: usize) -> f64 {
    let nf = n_out as f64;
    let n = log2_dim(n_out);
    let bad = 6.0 / nf + 4.0 * (nf - 1.0) / (1e-4 * (nf + 2.0) * (nf + 3.0));
    let tail = 2.0 * (-(k as f64) / (1600.0 * n * n)).exp();
    ((1.0 - bad.min(1.0)) * (1.0 - tail.min(1.0))).max(0.0)
}

/// Columns 0 and `i` of a Haar unitary: Gram–Schmidt on two complex Gaussian vectors.
fn haar_columns(dim: usize, i: usize, rng: &mut PrfRng) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut draw = || -> Vec<Complex64> {
        (0..dim)
            .map(|_| {
                let (a, b) = gaussian_pair(rng);
                Complex64::new(a, b)
            })
            .collect()
    };
    let normalize = |v: &mut Vec<Complex64>| {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
    };
    let mut c0 = draw();
    normalize(&mut c0);
    if i == 0 {
        return (c0.clone(), c0);
    }
    let mut ci = draw();
    let proj: Complex64 = c0.iter().zip(&ci).map(|(a, b)| a.conj() * b).sum();
    for (x, a) in ci.iter_mut().zip(&c0) {
        *x -= proj * a;
    }
    normalize(&mut ci);
    (c0, ci)
}

/// All frequency vectors of length `n` summing to `k`, in lexicographic order.
pub fn compositions(n: usize, k: usize) -> Vec<Vec<u32>> {
    fn rec(pos: usize, left: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left as u32;
            out.push(cur.clone());
            return;
        }
        for v in (0..=left).rev() {
            cur[pos] = v as u32;
            rec(pos + 1, left - v, cur, out);
        }
    }
    let mut out = Vec::new();
    rec(0, k, &mut vec![0; n], &mut out);
    out
}

fn freq_dist_check(n_out: usize, k: usize, trials: u64, seed: &Key32) -> Result<OracleReport> {
    if k == 0 {
        return Err(invalid("freq-dist needs k >= 1"));
    }
    let count = binomial(n_out + k - 1, k);
    if count > 100_000 {
        return Err(invalid(format!("{count} compositions is too many to tabulate")));
    }
    let comps = compositions(n_out, k);
    let index: HashMap<Vec<u32>, usize> = comps.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
    let cells = par_trials(seed, LemmaId::FreqDist.as_str(), trials, |rng| {
        let p = sample_dirichlet(n_out, rng).expect("dim >= 2");
        let sampler = CdfSampler::new(p.probabilities());
        let mut m = vec![0u32; n_out];
        for _ in 0..k {
            m[sampler.sample(rng)] += 1;
        }
        index[&m]
    });
    let mut observed = vec![0u64; comps.len()];
    for c in cells {
        observed[c] += 1;
    }
    let expected = trials as f64 / comps.len() as f64;
    let chi2: f64 = observed.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let df = (comps.len() - 1) as f64;
    let critical = ChiSquared::new(df).map_err(|e| invalid(e.to_string()))?.inverse_cdf(0.99);
    Ok(OracleReport::new(LemmaId::FreqDist.as_str(), trials, chi2, critical, 0.0, Comparison::AtMost))
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}
