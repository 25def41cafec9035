//! The three protocol engines and transcript replay.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::devices::{Responder, Response};
use crate::error::{invalid, Error, Result};
use crate::prf::{derive_key, prf_block, Key32, PrfRng};
use crate::sampling::{bernoulli, pairwise_sum};
use crate::simcore::{derive_circuit, output_distribution, Circuit, OutputDistribution};
use crate::verifier::config::{ProtocolConfig, ProtocolKind};
use crate::verifier::scoring::{duplicate_check, lxeb_score};
use crate::verifier::transcript::{Decision, EpochSummary, Header, RoundRecord, Trailer, Transcript, TRANSCRIPT_FORMAT};

pub const SESSION_LABEL: &[u8] = b"certrand/session";

pub fn session_key(master: &Key32, session: u64) -> Key32 {
    derive_key(master, SESSION_LABEL, session)
}

pub fn session_id(master: &Key32, session: u64) -> [u8; 16] {
    let block = prf_block(&session_key(master, session), b"session-id", 0);
    let mut id = [0u8; 16];
    id.copy_from_slice(&block[..16]);
    id
}

/// One scheduled round: which epoch it belongs to, its verifier coins, and
/// its challenge circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduledRound {
    pub round: u64,
    pub epoch: u64,
    pub refresh: bool,
    pub test: bool,
    pub circuit: Circuit,
}

/// The verifier's coin and challenge sequence for one session, a pure
/// function of `(config, session)`.
pub struct Schedule {
    config: ProtocolConfig,
    key: Key32,
    coins: PrfRng,
    round: u64,
    epoch: u64,
    prev_refresh: bool,
    circuit: Option<Circuit>,
}

impl Schedule {
    pub fn new(config: &ProtocolConfig, session: u64) -> Self {
        let key = session_key(&config.master_key, session);
        Self {
            coins: PrfRng::new(&key, "verifier/flags"),
            config: config.clone(),
            key,
            round: 0,
            epoch: 0,
            prev_refresh: false,
            circuit: None,
        }
    }

    pub fn next_round(&mut self) -> Result<ScheduledRound> {
        let c = &self.config;
        let (refresh, test) = match c.kind {
            ProtocolKind::Llha => {
                let t = bernoulli(&mut self.coins, c.gamma);
                (t, t)
            }
            ProtocolKind::Full => {
                let t = bernoulli(&mut self.coins, c.gamma);
                let f = bernoulli(&mut self.coins, c.eta);
                (t, f)
            }
            ProtocolKind::Ideal => (false, bernoulli(&mut self.coins, c.gamma)),
        };
        if self.round > 0 && self.prev_refresh {
            self.epoch += 1;
            self.circuit = None;
        }
        if self.circuit.is_none() {
            self.circuit = Some(derive_circuit(&self.key, self.epoch, c.ensemble, c.n, c.depth)?);
        }
        let out = ScheduledRound {
            round: self.round,
            epoch: self.epoch,
            refresh,
            test,
            circuit: self.circuit.clone().expect("set above"),
        };
        self.prev_refresh = refresh;
        self.round += 1;
        Ok(out)
    }
}

/// Decision logic over recorded rounds, shared by live runs and replay.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub scores: Vec<Option<f64>>,
    pub passes: Vec<Option<bool>>,
    pub epochs: Vec<EpochSummary>,
    pub tests: u64,
    pub decision: Decision,
    pub statistic: Option<f64>,
    pub mean_normalized_score: Option<f64>,
    pub reason: Option<String>,
}

struct DistCache(Option<(Circuit, OutputDistribution)>);

impl DistCache {
    fn get(&mut self, c: &Circuit) -> Result<&OutputDistribution> {
        if self.0.as_ref().map(|(k, _)| k != c).unwrap_or(true) {
            self.0 = Some((c.clone(), output_distribution(c)?));
        }
        Ok(&self.0.as_ref().expect("filled").1)
    }
}

/// Scores the test rounds and decides. `rounds` must all be complete
/// responses; if fewer than `m` rounds are present the decision is `Abort`
/// unless the caller overrides it with an error decision.
pub fn evaluate(config: &ProtocolConfig, rounds: &[RoundRecord]) -> Result<Evaluation> {
    let dim = config.dim() as f64;
    let mut cache = DistCache(None);
    let mut scores = vec![None; rounds.len()];
    let mut passes = vec![None; rounds.len()];
    let mut epochs: Vec<EpochSummary> = Vec::new();
    let mut epoch_scores: Vec<Vec<f64>> = Vec::new();
    let mut epoch_start = 0usize;

    for (i, r) in rounds.iter().enumerate() {
        if epochs.last().map(|e| e.epoch != r.epoch).unwrap_or(true) {
            epochs.push(EpochSummary { epoch: r.epoch, rounds: 0, tests: 0, score: None, pass: None, counted: false });
            epoch_scores.push(Vec::new());
            epoch_start = i;
        }
        let summary = epochs.last_mut().expect("pushed");
        summary.rounds += 1;
        if !r.test {
            continue;
        }
        summary.tests += 1;
        let p = cache.get(&r.circuit)?;
        let raw = lxeb_score(p, &r.samples)?.raw;
        scores[i] = Some(raw);
        epoch_scores.last_mut().expect("pushed").push(raw);
        if config.kind == ProtocolKind::Llha {
            let owned: Vec<Response> = rounds[epoch_start..=i]
                .iter()
                .map(|x| Response { round: x.round, samples: x.samples.clone() })
                .collect();
            let epoch: Vec<(&Circuit, &Response)> =
                rounds[epoch_start..=i].iter().map(|x| &x.circuit).zip(owned.iter()).collect();
            let unique = duplicate_check(&epoch, config.duplicate_mode)?;
            passes[i] = Some(raw >= config.threshold / dim && unique);
        }
    }

    let all: Vec<f64> = scores.iter().flatten().copied().collect();
    let tests = all.len() as u64;
    let mean_normalized_score = (tests > 0).then(|| pairwise_sum(&all) / tests as f64 * dim);
    let complete = rounds.len() as u64 == config.m;
    let mut reason = None;

    let (accepted, statistic) = match config.kind {
        ProtocolKind::Llha => {
            let w = passes.iter().flatten().filter(|&&b| b).count() as f64;
            let q = (tests > 0).then(|| w / tests as f64);
            if tests == 0 {
                reason = Some("no test rounds".to_string());
            }
            (tests > 0 && w >= config.pass_fraction * tests as f64, q)
        }
        ProtocolKind::Ideal => {
            let s = (tests > 0).then(|| pairwise_sum(&all) / tests as f64);
            if tests == 0 {
                reason = Some("no test rounds".to_string());
            }
            (s.map(|s| s >= config.threshold / dim).unwrap_or(false), s)
        }
        ProtocolKind::Full => {
            let (mut counted, mut passed) = (0u64, 0u64);
            for (e, xs) in epochs.iter_mut().zip(&epoch_scores) {
                if xs.is_empty() {
                    continue;
                }
                let s = pairwise_sum(xs) / xs.len() as f64;
                let pass = s >= config.threshold / dim;
                e.score = Some(s);
                e.pass = Some(pass);
                e.counted = e.tests >= config.min_epoch_tests;
                if e.counted {
                    counted += 1;
                    passed += u64::from(pass);
                }
            }
            if counted == 0 {
                reason = Some("no epoch has enough test rounds".to_string());
            }
            let frac = (counted > 0).then(|| passed as f64 / counted as f64);
            (counted > 0 && passed as f64 >= config.pass_fraction * counted as f64, frac)
        }
    };
    if config.kind == ProtocolKind::Llha {
        for (e, xs) in epochs.iter_mut().zip(&epoch_scores) {
            if !xs.is_empty() {
                e.score = Some(pairwise_sum(xs) / xs.len() as f64);
                e.counted = true;
            }
        }
    }
    let decision = if !complete {
        reason = Some(format!("only {} of {} rounds recorded", rounds.len(), config.m));
        Decision::Abort
    } else if accepted {
        Decision::Accept
    } else {
        Decision::Abort
    };
    Ok(Evaluation { scores, passes, epochs, tests, decision, statistic, mean_normalized_score, reason })
}

/// Runs one session against `device`. Device failures end the session early
/// with a `protocol-error` or `timeout` decision; they are not returned as
/// errors.
pub fn run_protocol(config: &ProtocolConfig, device: &mut dyn Responder, session: u64) -> Result<Transcript> {
    config.validate()?;
    if device.n() != config.n {
        return Err(invalid(format!("device has n = {}, protocol has n = {}", device.n(), config.n)));
    }
    let mut schedule = Schedule::new(config, session);
    let mut rounds = Vec::with_capacity(config.m as usize);
    let mut failure: Option<(Decision, String)> = None;
    for _ in 0..config.m {
        let s = schedule.next_round()?;
        let outcome = device
            .respond(s.round, &s.circuit, config.k)
            .and_then(|r| {
                if r.round != s.round {
                    return Err(Error::Schema(format!("response for round {} in round {}", r.round, s.round)));
                }
                r.validate(config.n, config.k)?;
                Ok(r)
            });
        match outcome {
            Ok(r) => rounds.push(RoundRecord {
                round: s.round,
                epoch: s.epoch,
                circuit: s.circuit,
                refresh: s.refresh,
                test: s.test,
                samples: r.samples,
                score: None,
                pass: None,
            }),
            Err(e) => {
                let decision = if matches!(e, Error::Timeout(_)) { Decision::Timeout } else { Decision::ProtocolError };
                failure = Some((decision, format!("round {}: {e}", s.round)));
                break;
            }
        }
    }
    finish(config, session, rounds, failure)
}

fn finish(
    config: &ProtocolConfig,
    session: u64,
    mut rounds: Vec<RoundRecord>,
    failure: Option<(Decision, String)>,
) -> Result<Transcript> {
    let ev = evaluate(config, &rounds)?;
    for (r, (s, p)) in rounds.iter_mut().zip(ev.scores.iter().zip(&ev.passes)) {
        r.score = *s;
        r.pass = *p;
    }
    let (decision, reason) = match failure {
        Some((d, why)) => (d, Some(why)),
        None => (ev.decision, ev.reason),
    };
    let header = Header {
        format: TRANSCRIPT_FORMAT.to_string(),
        config: config.clone(),
        session,
        session_id: hex::encode(session_id(&config.master_key, session)),
    };
    let trailer = Trailer {
        rounds_run: rounds.len() as u64,
        tests: ev.tests,
        epochs: ev.epochs,
        decision,
        statistic: ev.statistic,
        mean_normalized_score: ev.mean_normalized_score,
        reason,
        hash: None,
    };
    Ok(Transcript::new(header, rounds, trailer))
}

/// Builds an error transcript for a session that failed before any round ran.
pub fn failed_session(config: &ProtocolConfig, session: u64, decision: Decision, why: String) -> Result<Transcript> {
    finish(config, session, Vec::new(), Some((decision, why)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<u64>,
    pub field: String,
    pub stored: String,
    pub recomputed: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub rounds: u64,
    pub stored_hash: String,
    pub computed_hash: String,
    pub hash_match: bool,
    pub stored_decision: Decision,
    pub recomputed_decision: Decision,
    pub decision_match: bool,
    pub mismatches: Vec<Mismatch>,
    pub matches: bool,
}

fn fmt_opt<T: std::fmt::Debug>(x: &Option<T>) -> String {
    match x {
        Some(v) => format!("{v:?}"),
        None => "none".into(),
    }
}

/// Re-derives every challenge and coin from the header, rescoring every
/// round and the decision, and reports each disagreement with the file.
pub fn replay(transcript: &Transcript, computed_hash: &str) -> Result<ReplayReport> {
    let config = &transcript.header.config;
    config.validate()?;
    let mut mismatches = Vec::new();
    let mut push = |round: Option<u64>, field: &str, stored: String, recomputed: String| {
        mismatches.push(Mismatch { round, field: field.to_string(), stored, recomputed });
    };
    let expected_id = hex::encode(session_id(&config.master_key, transcript.header.session));
    if transcript.header.session_id != expected_id {
        push(None, "session_id", transcript.header.session_id.clone(), expected_id);
    }
    if transcript.rounds.len() as u64 > config.m {
        return Err(Error::CorruptTranscript(format!("{} rounds recorded, m = {}", transcript.rounds.len(), config.m)));
    }
    let mut schedule = Schedule::new(config, transcript.header.session);
    let mut scorable = true;
    for r in &transcript.rounds {
        let s = schedule.next_round()?;
        if r.round != s.round {
            push(Some(s.round), "round", r.round.to_string(), s.round.to_string());
        }
        if r.epoch != s.epoch {
            push(Some(s.round), "epoch", r.epoch.to_string(), s.epoch.to_string());
        }
        if r.refresh != s.refresh {
            push(Some(s.round), "refresh", r.refresh.to_string(), s.refresh.to_string());
        }
        if r.test != s.test {
            push(Some(s.round), "test", r.test.to_string(), s.test.to_string());
        }
        if r.circuit != s.circuit {
            push(Some(s.round), "circuit", r.circuit.to_json(), s.circuit.to_json());
        }
        let resp = Response { round: r.round, samples: r.samples.clone() };
        if let Err(e) = resp.validate(config.n, config.k) {
            push(Some(s.round), "samples", format!("{:?}", r.samples), e.to_string());
            scorable = false;
        }
    }
    let stored = transcript.trailer.decision;
    let recomputed = if scorable {
        let ev = evaluate(config, &transcript.rounds)?;
        for (r, (s, p)) in transcript.rounds.iter().zip(ev.scores.iter().zip(&ev.passes)) {
            let same = match (r.score, s) {
                (Some(a), Some(b)) => a.to_bits() == b.to_bits(),
                (None, None) => true,
                _ => false,
            };
            if !same {
                push(Some(r.round), "score", fmt_opt(&r.score), fmt_opt(s));
            }
            if r.pass != *p {
                push(Some(r.round), "pass", fmt_opt(&r.pass), fmt_opt(p));
            }
        }
        if transcript.trailer.epochs != ev.epochs {
            push(None, "epochs", format!("{} summaries", transcript.trailer.epochs.len()), format!("{} summaries", ev.epochs.len()));
        }
        if transcript.trailer.tests != ev.tests {
            push(None, "tests", transcript.trailer.tests.to_string(), ev.tests.to_string());
        }
        if transcript.trailer.statistic.map(f64::to_bits) != ev.statistic.map(f64::to_bits) {
            push(None, "statistic", fmt_opt(&transcript.trailer.statistic), fmt_opt(&ev.statistic));
        }
        if stored.is_error() && (transcript.rounds.len() as u64) < config.m {
            stored
        } else {
            ev.decision
        }
    } else {
        Decision::ProtocolError
    };
    if transcript.trailer.rounds_run != transcript.rounds.len() as u64 {
        push(None, "rounds_run", transcript.trailer.rounds_run.to_string(), transcript.rounds.len().to_string());
    }
    let stored_hash = transcript.trailer.hash.clone().unwrap_or_default();
    let hash_match = stored_hash == computed_hash;
    let decision_match = stored == recomputed;
    if !decision_match {
        push(None, "decision", stored.as_str().into(), recomputed.as_str().into());
    }
    let matches = hash_match && mismatches.is_empty();
    Ok(ReplayReport {
        rounds: transcript.rounds.len() as u64,
        stored_hash,
        computed_hash: computed_hash.to_string(),
        hash_match,
        stored_decision: stored,
        recomputed_decision: recomputed,
        decision_match,
        mismatches,
        matches,
    })
}

pub fn replay_transcript(path: &Path) -> Result<ReplayReport> {
    let (t, hash) = Transcript::read(path)?;
    replay(&t, &hash)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{make_device, DeviceKind, DeviceModel};
    use crate::verifier::scoring::DuplicateMode;

    fn full_config(m: u64) -> ProtocolConfig {
        let mut c = ProtocolConfig::new(ProtocolKind::Full, 8, m, 1.5, 1.0 / 200.0, Key32::filled(5));
        c.eta = 0.5;
        c.min_epoch_tests = 20;
        c
    }

    fn run(config: &ProtocolConfig, kind: DeviceKind, session: u64) -> Transcript {
        let mut d = make_device(DeviceModel::new(kind, Key32::filled(7)), config.n).unwrap();
        run_protocol(config, &mut d, session).unwrap()
    }

    #[test]
    fn schedule_is_deterministic_and_refreshes_after_flag() {
        let c = full_config(500);
        let mut a = Schedule::new(&c, 3);
        let mut b = Schedule::new(&c, 3);
        let mut prev: Option<ScheduledRound> = None;
        for _ in 0..500 {
            let x = a.next_round().unwrap();
            assert_eq!(x, b.next_round().unwrap());
            if let Some(p) = prev {
                assert_eq!(x.epoch, p.epoch + u64::from(p.refresh));
                assert_eq!(x.circuit == p.circuit, !p.refresh);
            }
            prev = Some(x);
        }
    }

    #[test]
    fn honest_accepted_uniform_rejected() {
        let c = full_config(2000);
        assert_eq!(run(&c, DeviceKind::Honest, 0).decision(), Decision::Accept);
        assert_eq!(run(&c, DeviceKind::Uniform, 0).decision(), Decision::Abort);
    }

    #[test]
    fn ideal_protocol_uses_one_circuit() {
        let mut c = ProtocolConfig::new(ProtocolKind::Ideal, 8, 400, 1.5, 0.5, Key32::filled(1));
        c.k = 1;
        let t = run(&c, DeviceKind::Honest, 0);
        assert!(t.rounds.iter().all(|r| r.circuit == t.rounds[0].circuit && r.epoch == 0));
        assert_eq!(t.decision(), Decision::Accept);
    }

    #[test]
    fn repeater_fails_duplicate_check() {
        let mut c = ProtocolConfig::new(ProtocolKind::Llha, 8, 200, 1.5, 0.2, Key32::filled(2));
        c.k = 20;
        for mode in [DuplicateMode::Strict, DuplicateMode::BatchIdentity] {
            c.duplicate_mode = mode;
            let t = run(&c, DeviceKind::Repeater, 0);
            assert_eq!(t.decision(), Decision::Abort);
        }
    }

    #[test]
    fn replay_detects_tampering() {
        let c = full_config(600);
        let t = run(&c, DeviceKind::Honest, 1);
        let r = replay(&t, &t.compute_hash()).unwrap();
        assert!(r.matches, "{r:?}");

        let mut bad = t.clone();
        let idx = bad.rounds.iter().position(|r| r.test).unwrap();
        bad.rounds[idx].samples[0] ^= 1;
        let r = replay(&bad, &bad.compute_hash()).unwrap();
        assert!(!r.matches);
        assert!(r.mismatches.iter().any(|m| m.field == "score" && m.round == Some(idx as u64)));

        let mut flipped = t.clone();
        flipped.trailer.decision = Decision::Abort;
        let r = replay(&flipped, &flipped.compute_hash()).unwrap();
        assert!(!r.decision_match);
        assert!(!r.hash_match);
    }

    #[test]
    fn sessions_differ() {
        let c = full_config(50);
        let a = run(&c, DeviceKind::Honest, 0);
        let b = run(&c, DeviceKind::Honest, 1);
        assert_ne!(a.header.session_id, b.header.session_id);
        assert_ne!(a.rounds[0].circuit, b.rounds[0].circuit);
        assert_eq!(a.hash(), run(&c, DeviceKind::Honest, 0).hash());
    }

    struct Broken;

    impl Responder for Broken {
        fn n(&self) -> u32 {
            8
        }
        fn respond(&mut self, round: u64, _: &Circuit, _: usize) -> Result<Response> {
            if round < 3 {
                Ok(Response { round, samples: vec![1] })
            } else if round == 3 {
                Ok(Response { round, samples: vec![1 << 9] })
            } else {
                Err(Error::Timeout("late".into()))
            }
        }
    }

    #[test]
    fn malformed_response_is_sticky_protocol_error() {
        let c = full_config(100);
        let t = run_protocol(&c, &mut Broken, 0).unwrap();
        assert_eq!(t.decision(), Decision::ProtocolError);
        assert_eq!(t.rounds.len(), 3);
        let r = replay(&t, &t.compute_hash()).unwrap();
        assert!(r.matches, "{r:?}");
    }
}
