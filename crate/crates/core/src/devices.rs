//! Simulated devices that answer challenge circuits with samples, and the
//! sample-membership game.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::prf::{Key32, PrfRng};
use crate::sampling::{below, bernoulli, mean_and_se};
use crate::simcore::{output_distribution, Circuit, OutputDistribution};
use crate::statlab::dist::{entropy, shannon_bits, CdfSampler, EntropyKind};
use crate::statlab::oracle::par_trials;
use crate::statlab::sample_dirichlet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceKind {
    Honest,
    Uniform,
    Topk,
    Postselect,
    Repeater,
    Mixed,
}

/// JSON shape: `{"kind": "mixed", "delta": 0.5, "seed": "<64 hex>"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceModel {
    pub kind: DeviceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leading_zeros: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retries: Option<u32>,
    pub seed: Key32,
}

impl DeviceModel {
    pub fn new(kind: DeviceKind, seed: Key32) -> Self {
        Self { kind, delta: None, leading_zeros: None, retries: None, seed }
    }

    pub fn mixed(delta: f64, seed: Key32) -> Self {
        Self { delta: Some(delta), ..Self::new(DeviceKind::Mixed, seed) }
    }

    pub fn postselect(leading_zeros: u32, retries: u32, seed: Key32) -> Self {
        Self { leading_zeros: Some(leading_zeros), retries: Some(retries), ..Self::new(DeviceKind::Postselect, seed) }
    }

    pub fn validate(&self, n: u32) -> Result<()> {
        let stray = |name: &str, present: bool| {
            if present {
                Err(invalid(format!("{name} is not a parameter of a {:?} device", self.kind)))
            } else {
                Ok(())
            }
        };
        match self.kind {
            DeviceKind::Mixed => {
                let d = self.delta.ok_or_else(|| invalid("mixed device needs delta"))?;
                if !(0.0..=1.0).contains(&d) {
                    return Err(invalid(format!("delta = {d} outside [0, 1]")));
                }
                stray("leading_zeros", self.leading_zeros.is_some())?;
                stray("retries", self.retries.is_some())
            }
            DeviceKind::Postselect => {
                let l = self.leading_zeros.ok_or_else(|| invalid("postselect device needs leading_zeros"))?;
                if l > n {
                    return Err(invalid(format!("{l} leading zeros on {n} qubits")));
                }
                match self.retries {
                    Some(r) if r >= 1 => {}
                    _ => return Err(invalid("postselect retry budget must be >= 1")),
                }
                stray("delta", self.delta.is_some())
            }
            _ => {
                stray("delta", self.delta.is_some())?;
                stray("leading_zeros", self.leading_zeros.is_some())?;
                stray("retries", self.retries.is_some())
            }
        }
    }
}

/// `k` samples, each an index `z < 2^n` whose bit `n − 1` is the leading bit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Response {
    pub round: u64,
    pub samples: Vec<u64>,
}

impl Response {
    pub fn validate(&self, n: u32, k: usize) -> Result<()> {
        if self.samples.len() != k {
            return Err(Error::LengthMismatch { expected: k, actual: self.samples.len() });
        }
        let dim = 1u64 << n;
        match self.samples.iter().find(|&&z| z >= dim) {
            Some(&z) => Err(Error::SampleOutOfRange { sample: z, n }),
            None => Ok(()),
        }
    }
}

pub fn bitstring(z: u64, n: u32) -> String {
    (0..n).rev().map(|b| if (z >> b) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Anything that can answer a challenge: a local simulated device or a
/// connection to a remote one.
pub trait Responder {
    fn n(&self) -> u32;
    fn respond(&mut self, round: u64, challenge: &Circuit, k: usize) -> Result<Response>;
}

#[derive(Debug)]
pub struct Device {
    model: DeviceModel,
    n: u32,
    honest_rng: PrfRng,
    uniform_rng: PrfRng,
    coin_rng: PrfRng,
    cached: Option<(Circuit, OutputDistribution, CdfSampler)>,
    last: Option<(Circuit, Vec<u64>)>,
}

pub fn make_device(model: DeviceModel, n: u32) -> Result<Device> {
    model.validate(n)?;
    if !(1..=63).contains(&n) {
        return Err(invalid(format!("n = {n} unsupported")));
    }
    Ok(Device {
        honest_rng: PrfRng::new(&model.seed, "device/honest"),
        uniform_rng: PrfRng::new(&model.seed, "device/uniform"),
        coin_rng: PrfRng::new(&model.seed, "device/coin"),
        model,
        n,
        cached: None,
        last: None,
    })
}

impl Device {
    pub fn model(&self) -> &DeviceModel {
        &self.model
    }

    fn distribution(&mut self, challenge: &Circuit) -> Result<()> {
        if self.cached.as_ref().map(|(c, _, _)| c != challenge).unwrap_or(true) {
            let p = output_distribution(challenge)?;
            let sampler = p.sampler();
            self.cached = Some((challenge.clone(), p, sampler));
        }
        Ok(())
    }

    fn honest_draw(&mut self) -> u64 {
        let (_, _, sampler) = self.cached.as_ref().expect("distribution loaded");
        sampler.sample(&mut self.honest_rng) as u64
    }

    fn uniform_draw(&mut self) -> u64 {
        below(&mut self.uniform_rng, 1u64 << self.n)
    }

    pub fn respond(&mut self, round: u64, challenge: &Circuit, k: usize) -> Result<Response> {
        if k == 0 {
            return Err(invalid("k must be positive"));
        }
        if challenge.n != self.n {
            return Err(invalid(format!("device built for n = {}, challenge has n = {}", self.n, challenge.n)));
        }
        let samples = match self.model.kind {
            DeviceKind::Uniform => (0..k).map(|_| self.uniform_draw()).collect(),
            DeviceKind::Honest => {
                self.distribution(challenge)?;
                (0..k).map(|_| self.honest_draw()).collect()
            }
            DeviceKind::Mixed => {
                let delta = self.model.delta.expect("validated");
                self.distribution(challenge)?;
                (0..k)
                    .map(|_| if bernoulli(&mut self.coin_rng, delta) { self.honest_draw() } else { self.uniform_draw() })
                    .collect()
            }
            DeviceKind::Topk => {
                self.distribution(challenge)?;
                let (_, p, _) = self.cached.as_ref().expect("loaded");
                top_k(p.probabilities(), k)?
            }
            DeviceKind::Postselect => {
                let zeros = self.model.leading_zeros.expect("validated");
                let retries = self.model.retries.expect("validated");
                let shift = self.n - zeros;
                self.distribution(challenge)?;
                (0..k)
                    .map(|_| {
                        let mut z = self.honest_draw();
                        for _ in 1..retries {
                            if zeros == 0 || z >> shift == 0 {
                                break;
                            }
                            z = self.honest_draw();
                        }
                        z
                    })
                    .collect()
            }
            DeviceKind::Repeater => match &self.last {
                Some((c, prev)) if c == challenge && prev.len() == k => prev.clone(),
                _ => {
                    self.distribution(challenge)?;
                    (0..k).map(|_| self.honest_draw()).collect()
                }
            },
        };
        self.last = Some((challenge.clone(), samples.clone()));
        Ok(Response { round, samples })
    }
}

impl Responder for Device {
    fn n(&self) -> u32 {
        self.n
    }

    fn respond(&mut self, round: u64, challenge: &Circuit, k: usize) -> Result<Response> {
        Device::respond(self, round, challenge, k)
    }
}

/// Indices of the `k` largest probabilities; equal probabilities go to the
/// lexicographically smaller string first.
pub fn top_k(p: &[f64], k: usize) -> Result<Vec<u64>> {
    if k > p.len() {
        return Err(invalid(format!("k = {k} exceeds support size {}", p.len())));
    }
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    Ok(idx.into_iter().take(k).map(|z| z as u64).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum GamePolicy {
    /// Return the first sample.
    FirstSample,
    /// Ignore the samples and return a uniform string.
    FreshUniform,
    /// First sample with probability `q`, otherwise uniform.
    Mixture { q: f64 },
    /// A most frequent sample, smallest index on ties.
    MostFrequent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub n_outcomes: usize,
    pub k: usize,
    pub distributions: u64,
    pub reps: u64,
    pub acceptance_rate: f64,
    pub acceptance_se: f64,
    /// Mean of `P(z)` over all outputs.
    pub mean_score: f64,
    pub mean_score_se: f64,
    /// Fraction of sampled `P` whose pooled output entropy is at least
    /// `H_min(P) − 2 log₂ k − 2`.
    pub entropy_bound_rate: f64,
    /// `ε = max(0, 2 − (N + k)·mean_score)`.
    pub score_deficit: f64,
    /// `(1 − ε − acceptance_rate)·N/k³`.
    pub membership_constant: f64,
}

/// For each of `distributions` draws `P ~ Dir(1^N)`, plays `reps` rounds of the
/// game against `policy`.
pub fn run_simplified_game(
    policy: GamePolicy,
    n_outcomes: usize,
    k: usize,
    distributions: u64,
    reps: u64,
    seed: &Key32,
) -> Result<GameReport> {
    if k == 0 || k >= n_outcomes {
        return Err(invalid(format!("need 0 < k < N, got k = {k}, N = {n_outcomes}")));
    }
    if distributions < 2 || reps == 0 {
        return Err(invalid("need at least two distributions and one repetition"));
    }
    if let GamePolicy::Mixture { q } = policy {
        if !(0.0..=1.0).contains(&q) {
            return Err(invalid(format!("mixture weight {q} outside [0, 1]")));
        }
    }
    struct PerP {
        accepts: Vec<f64>,
        scores: Vec<f64>,
        entropy_ok: bool,
    }
    let per_p = par_trials(seed, "simplified-game", distributions, |rng| {
        let p = sample_dirichlet(n_outcomes, rng).expect("N >= 2");
        let sampler = CdfSampler::new(p.probabilities());
        let mut counts = vec![0u64; n_outcomes];
        let mut accepts = Vec::with_capacity(reps as usize);
        let mut scores = Vec::with_capacity(reps as usize);
        let mut zs = vec![0usize; k];
        for _ in 0..reps {
            zs.iter_mut().for_each(|z| *z = sampler.sample(rng));
            let out = match policy {
                GamePolicy::FirstSample => zs[0],
                GamePolicy::FreshUniform => below(rng, n_outcomes as u64) as usize,
                GamePolicy::Mixture { q } => {
                    if bernoulli(rng, q) {
                        zs[0]
                    } else {
                        below(rng, n_outcomes as u64) as usize
                    }
                }
                GamePolicy::MostFrequent => most_frequent(&zs),
            };
            counts[out] += 1;
            accepts.push(if zs.contains(&out) { 1.0 } else { 0.0 });
            scores.push(p.get(out));
        }
        let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / reps as f64).collect();
        let pooled = shannon_bits(&freq);
        let bound = entropy(&p, EntropyKind::Min) - 2.0 * (k as f64).log2() - 2.0;
        PerP { accepts, scores, entropy_ok: pooled >= bound }
    });
    let accepts: Vec<f64> = per_p.iter().flat_map(|r| r.accepts.iter().copied()).collect();
    let scores: Vec<f64> = per_p.iter().flat_map(|r| r.scores.iter().copied()).collect();
    let (acceptance_rate, acceptance_se) = mean_and_se(&accepts);
    let (mean_score, mean_score_se) = mean_and_se(&scores);
    let entropy_bound_rate = per_p.iter().filter(|r| r.entropy_ok).count() as f64 / distributions as f64;
    let nf = n_outcomes as f64;
    let score_deficit = (2.0 - (nf + k as f64) * mean_score).max(0.0);
    Ok(GameReport {
        n_outcomes,
        k,
        distributions,
        reps,
        acceptance_rate,
        acceptance_se,
        mean_score,
        mean_score_se,
        entropy_bound_rate,
        score_deficit,
        membership_constant: (1.0 - score_deficit - acceptance_rate) * nf / (k as f64).powi(3),
    })
}

fn most_frequent(zs: &[usize]) -> usize {
    let mut sorted = zs.to_vec();
    sorted.sort_unstable();
    let (mut best, mut best_count) = (sorted[0], 0);
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&z| z == sorted[i]).count();
        if j > best_count {
            best = sorted[i];
            best_count = j;
        }
        i += j;
    }
    best
}
