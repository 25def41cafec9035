//! Toy versions of the set-size lower-bound protocol and of long-list
//! verification instances.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::prf::{Key32, PrfRng};
use crate::sampling::{below, mean_and_se};
use crate::simcore::{derive_circuit, output_distribution, Circuit, Ensemble};
use crate::statlab::oracle::par_trials;

/// 2^61 − 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

/// `h(x) = ((a·x + b) mod p) mod R` with `p = 2^61 − 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairwiseHash {
    pub a: u64,
    pub b: u64,
    pub range: u64,
}

impl PairwiseHash {
    pub fn random(range: u64, rng: &mut PrfRng) -> Self {
        Self { a: 1 + below(rng, MERSENNE_61 - 1), b: below(rng, MERSENNE_61), range }
    }

    pub fn eval(&self, x: u64) -> u64 {
        let v = (u128::from(self.a) * u128::from(x % MERSENNE_61) + u128::from(self.b)) % u128::from(MERSENNE_61);
        (v as u64) % self.range
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GsParams {
    pub kappa: u64,
    pub eps: f64,
    pub alpha: f64,
    /// Size of the ambient set the hash is defined on.
    pub universe: u64,
}

impl GsParams {
    /// Hash range `R = 2ακ/ε`, rounded to the nearest integer.
    pub fn range(&self) -> Result<u64> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(invalid(format!("eps = {} outside (0, 1)", self.eps)));
        }
        if !(self.alpha >= 1.0) {
            return Err(invalid(format!("alpha = {} < 1", self.alpha)));
        }
        let r = (2.0 * self.alpha * self.kappa as f64 / self.eps).round();
        if r < 1.0 {
            return Err(invalid("hash range R < 1"));
        }
        Ok(r as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GsReport {
    pub range: u64,
    pub yes_size: u64,
    pub no_size: u64,
    pub trials: u64,
    pub yes_rate: f64,
    pub yes_se: f64,
    pub no_rate: f64,
    pub no_se: f64,
    pub gap: f64,
    /// `(κ/R)(1 − ε/2)`
    pub yes_lower: f64,
    /// `(κ/R)(1 − ε)`
    pub no_upper: f64,
    /// `ε²/(4α)`
    pub gap_lower: f64,
}

/// Fraction of trials where a fresh hash `h` and target `y ∈ [R]` have a
/// preimage inside `S = {0, …, set_size − 1}`.
pub fn gs_acceptance_rate(set_size: u64, range: u64, universe: u64, trials: u64, seed: &Key32, label: &str) -> Result<(f64, f64)> {
    if set_size > universe {
        return Err(invalid(format!("set size {set_size} exceeds universe {universe}")));
    }
    if range < 1 {
        return Err(invalid("hash range R < 1"));
    }
    let hits = par_trials(seed, label, trials, |rng| {
        let h = PairwiseHash::random(range, rng);
        let y = below(rng, range);
        if (0..set_size).any(|x| h.eval(x) == y) { 1.0 } else { 0.0 }
    });
    Ok(mean_and_se(&hits))
}

pub fn gs_gap_experiment(params: &GsParams, trials: u64, seed: &Key32) -> Result<GsReport> {
    let range = params.range()?;
    let yes_size = params.kappa;
    let no_size = ((1.0 - params.eps) * params.kappa as f64).floor() as u64;
    let (yes_rate, yes_se) = gs_acceptance_rate(yes_size, range, params.universe, trials, seed, "gs/yes")?;
    let (no_rate, no_se) = gs_acceptance_rate(no_size, range, params.universe, trials, seed, "gs/no")?;
    let ratio = params.kappa as f64 / range as f64;
    Ok(GsReport {
        range,
        yes_size,
        no_size,
        trials,
        yes_rate,
        yes_se,
        no_rate,
        no_se,
        gap: yes_rate - no_rate,
        yes_lower: ratio * (1.0 - params.eps / 2.0),
        no_upper: ratio * (1.0 - params.eps),
        gap_lower: params.eps * params.eps / (4.0 * params.alpha),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlqsvCase {
    Yes,
    No,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlqsvTuple {
    pub circuit: Circuit,
    pub sample: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlqsvInstance {
    pub case: LlqsvCase,
    pub n: u32,
    pub tuples: Vec<LlqsvTuple>,
    /// The problem statement asks for `M = N³` tuples; desk instances use fewer.
    pub nominal_m: u128,
}

pub const LLQSV_MAX_QUBITS: u32 = 12;
pub const LLQSV_MAX_TUPLES: usize = 10_000;

pub fn llqsv_make_instance(n: u32, m: usize, case: LlqsvCase, master_key: &Key32) -> Result<LlqsvInstance> {
    if !(2..=LLQSV_MAX_QUBITS).contains(&n) {
        return Err(invalid(format!("n = {n} outside [2, {LLQSV_MAX_QUBITS}]")));
    }
    if m == 0 || m > LLQSV_MAX_TUPLES {
        return Err(invalid(format!("M = {m} outside [1, {LLQSV_MAX_TUPLES}]")));
    }
    let dim = 1u64 << n;
    let tuples = (0..m as u64)
        .map(|i| {
            let circuit = derive_circuit(master_key, i, Ensemble::HaarColumn, n, None)?;
            let sample = match case {
                LlqsvCase::Yes => {
                    let p = output_distribution(&circuit)?;
                    p.sampler().sample(&mut PrfRng::substream(master_key, "llqsv/yes", i)) as u64
                }
                LlqsvCase::No => below(&mut PrfRng::substream(master_key, "llqsv/no", i), dim),
            };
            Ok(LlqsvTuple { circuit, sample })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LlqsvInstance { case, n, tuples, nominal_m: u128::from(dim).pow(3) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlqsvVerdict {
    pub case: LlqsvCase,
    /// Mean of `log₂(N·p_C(s))` over the tuples.
    pub statistic: f64,
    pub margin: f64,
}

/// Thresholds the mean log-likelihood ratio against uniform at zero, using
/// exact output probabilities.
pub fn llqsv_likelihood_distinguisher(instance: &LlqsvInstance) -> Result<LlqsvVerdict> {
    let dim = (1u64 << instance.n) as f64;
    let mut total = 0.0;
    for t in &instance.tuples {
        let p = output_distribution(&t.circuit)?.prob(t.sample);
        total += (dim * p.max(f64::MIN_POSITIVE)).log2();
    }
    let statistic = total / instance.tuples.len() as f64;
    let case = if statistic > 0.0 { LlqsvCase::Yes } else { LlqsvCase::No };
    Ok(LlqsvVerdict { case, statistic, margin: statistic.abs() })
}
