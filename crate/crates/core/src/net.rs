//! TCP transport: the verifier service, the device client and the adapter
//! that lets `run_protocol` drive a remote device.
//!
//! The verifier speaks first with a hello naming `(n, k, m, protocol)`; the
//! device answers with its own hello, then each round is one challenge and one
//! response. The session closes with a decision frame carrying the transcript
//! hash.

use std::fs;
use std::io::Write;
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::devices::{make_device, DeviceModel, Responder, Response};
use crate::eat::{certify_transcript, EntropyCertificate};
use crate::error::{Error, Result};
use crate::extractor::{bits_from_bytes, bytes_from_bits, samples_to_bits, Extractor, ExtractorSpec};
use crate::simcore::Circuit;
use crate::verifier::{failed_session, run_protocol, session_id, Decision, ProtocolConfig, Transcript};
use crate::wire::{read_message, write_message, Challenge, Failure, Hello, Payload, Samples, Verdict, WireMessage};

const CLIENT_READ_TIMEOUT: Duration = Duration::from_secs(60);

pub struct RemoteDevice {
    stream: TcpStream,
    session_id: [u8; 16],
    n: u32,
}

impl RemoteDevice {
    pub fn new(stream: TcpStream, session_id: [u8; 16], n: u32) -> Self {
        Self { stream, session_id, n }
    }
}

impl Responder for RemoteDevice {
    fn n(&self) -> u32 {
        self.n
    }

    fn respond(&mut self, round: u64, challenge: &Circuit, k: usize) -> Result<Response> {
        let msg = WireMessage::new(self.session_id, round, Payload::Challenge(Challenge { circuit: challenge.clone(), k }));
        write_message(&mut self.stream, &msg)?;
        let reply = read_message(&mut self.stream)?;
        if reply.session_id != self.session_id {
            return Err(Error::Schema("reply for another session".into()));
        }
        match reply.payload {
            Payload::Response(Samples { samples }) => Ok(Response { round: reply.round, samples }),
            Payload::Error(Failure { message }) => Err(Error::Schema(format!("device reported: {message}"))),
            other => Err(Error::Schema(format!("expected a response, got {:?}", other.message_type()))),
        }
    }
}

/// Certify an accepted transcript and, given a seed, extract `m` bits from its
/// samples with per-bit error `smoothing_eps`.
#[derive(Clone, Debug, Default)]
pub struct PostProcess {
    pub certify: bool,
    pub extract: Option<(usize, Vec<u8>)>,
}

#[derive(Clone, Debug)]
pub struct ServiceOptions {
    pub out_dir: PathBuf,
    pub post: PostProcess,
    /// Stop accepting after this many connections.
    pub max_sessions: Option<u64>,
    pub first_session: u64,
}

impl ServiceOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self { out_dir: out_dir.into(), post: PostProcess::default(), max_sessions: None, first_session: 0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub session: u64,
    pub session_id: String,
    pub decision: Decision,
    pub transcript: PathBuf,
    pub hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certified_bits: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_bits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_error: Option<String>,
}

/// Entropy certificate plus extractor output for an accepted transcript. The
/// seed must hold at least `d` bits, read most significant first.
pub fn extract_from_transcript(
    transcript: &Transcript,
    seed: &[u8],
    m: usize,
) -> Result<(EntropyCertificate, ExtractorSpec, Vec<bool>)> {
    let cert = certify_transcript(transcript)?;
    let config = &transcript.header.config;
    let samples: Vec<u64> = transcript.rounds.iter().flat_map(|r| r.samples.iter().copied()).collect();
    let x = samples_to_bits(&samples, config.n);
    let ext = Extractor::new(x.len(), m, config.smoothing_eps)?;
    ext.spec.check_budget(cert.certified_bits)?;
    let y = bits_from_bytes(seed, ext.seed_len())?;
    let out = ext.extract(&x, &y)?;
    Ok((cert, ext.spec, out))
}

fn serve(config: &ProtocolConfig, mut stream: TcpStream, session: u64) -> Result<Transcript> {
    let id = session_id(&config.master_key, session);
    let fail = |decision: Decision, why: String| failed_session(config, session, decision, why);
    let decision_of = |e: &Error| if matches!(e, Error::Timeout(_)) { Decision::Timeout } else { Decision::ProtocolError };

    if let Err(e) = stream
        .set_read_timeout(Some(Duration::from_millis(config.timeout_ms)))
        .and_then(|_| stream.set_nodelay(true))
    {
        return fail(Decision::ProtocolError, e.to_string());
    }
    let hello = Hello { n: config.n, k: Some(config.k), m: Some(config.m), protocol: Some(config.kind) };
    if let Err(e) = write_message(&mut stream, &WireMessage::new(id, 0, Payload::Hello(hello))) {
        return fail(decision_of(&e), format!("hello: {e}"));
    }
    match read_message(&mut stream) {
        Ok(WireMessage { payload: Payload::Hello(h), .. }) if h.n == config.n => {}
        Ok(WireMessage { payload: Payload::Hello(h), .. }) => {
            let why = format!("device has n = {}, protocol has n = {}", h.n, config.n);
            let _ = write_message(&mut stream, &WireMessage::new(id, 0, Payload::Error(Failure { message: why.clone() })));
            return fail(Decision::ProtocolError, why);
        }
        Ok(other) => return fail(Decision::ProtocolError, format!("expected hello, got {:?}", other.message_type())),
        Err(e) => return fail(decision_of(&e), format!("hello: {e}")),
    }

    let reader = match stream.try_clone() {
        Ok(s) => s,
        Err(e) => return fail(Decision::ProtocolError, e.to_string()),
    };
    let mut remote = RemoteDevice::new(reader, id, config.n);
    let transcript = run_protocol(config, &mut remote, session)?;
    let verdict = Verdict {
        decision: transcript.decision(),
        transcript_hash: transcript.hash().to_string(),
        reason: transcript.trailer.reason.clone(),
    };
    let _ = write_message(&mut stream, &WireMessage::new(id, transcript.trailer.rounds_run, Payload::Decision(verdict)));
    Ok(transcript)
}

struct Store {
    dir: PathBuf,
    lock: Mutex<()>,
}

impl Store {
    fn path(&self, session: u64, ext: &str) -> PathBuf {
        self.dir.join(format!("session-{session:06}.{ext}"))
    }

    /// Writes the session's files and appends one line to the index.
    fn persist(&self, transcript: &Transcript, post: &PostProcess) -> Result<SessionOutcome> {
        let session = transcript.header.session;
        let mut outcome = SessionOutcome {
            session,
            session_id: transcript.header.session_id.clone(),
            decision: transcript.decision(),
            transcript: self.path(session, "jsonl"),
            hash: transcript.hash().to_string(),
            certified_bits: None,
            output_bits: None,
            post_error: None,
        };
        let mut files: Vec<(PathBuf, Vec<u8>)> = vec![(outcome.transcript.clone(), transcript.to_jsonl().into_bytes())];
        if transcript.decision() == Decision::Accept && (post.certify || post.extract.is_some()) {
            let result = match &post.extract {
                Some((m, seed)) => extract_from_transcript(transcript, seed, *m).map(|(c, s, b)| (c, Some((s, b)))),
                None => certify_transcript(transcript).map(|c| (c, None)),
            };
            match result {
                Ok((cert, extracted)) => {
                    outcome.certified_bits = Some(cert.certified_bits);
                    files.push((self.path(session, "cert.json"), serde_json::to_vec_pretty(&cert)?));
                    if let Some((spec, bits)) = extracted {
                        outcome.output_bits = Some(bits.len());
                        files.push((self.path(session, "spec.json"), serde_json::to_vec_pretty(&spec)?));
                        files.push((self.path(session, "bits"), bytes_from_bits(&bits)));
                    }
                }
                Err(e) => outcome.post_error = Some(e.to_string()),
            }
        }
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        for (path, bytes) in files {
            fs::write(path, bytes)?;
        }
        let mut index = fs::OpenOptions::new().create(true).append(true).open(self.dir.join("sessions.jsonl"))?;
        writeln!(index, "{}", serde_json::to_string(&outcome)?)?;
        Ok(outcome)
    }
}

/// Serves one session per connection, each on its own thread. Returns once
/// `max_sessions` connections have finished, or never when unbounded.
pub fn run_verifier_service(
    config: &ProtocolConfig,
    listener: TcpListener,
    opts: &ServiceOptions,
) -> Result<Vec<SessionOutcome>> {
    config.validate()?;
    fs::create_dir_all(&opts.out_dir)?;
    let store = Store { dir: opts.out_dir.clone(), lock: Mutex::new(()) };
    let next = AtomicU64::new(opts.first_session);
    let outcomes = Mutex::new(Vec::new());
    std::thread::scope(|scope| -> Result<()> {
        let mut accepted = 0u64;
        for conn in listener.incoming() {
            if opts.max_sessions.is_some_and(|max| accepted >= max) {
                break;
            }
            let stream = match conn {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            accepted += 1;
            let session = next.fetch_add(1, Ordering::SeqCst);
            let (store, outcomes) = (&store, &outcomes);
            scope.spawn(move || {
                let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
                let transcript = serve(config, stream, session).or_else(|e| {
                    failed_session(config, session, Decision::ProtocolError, e.to_string())
                });
                let result = transcript.and_then(|t| store.persist(&t, &opts.post));
                match result {
                    Ok(o) => {
                        log::info!("session {} ({}) from {peer}: {}", o.session, o.session_id, o.decision.as_str());
                        outcomes.lock().unwrap_or_else(|p| p.into_inner()).push(o);
                    }
                    Err(e) => log::error!("session {session} from {peer}: {e}"),
                }
            });
            if opts.max_sessions.is_some_and(|max| accepted >= max) {
                break;
            }
        }
        Ok(())
    })?;
    let mut out = outcomes.into_inner().unwrap_or_else(|p| p.into_inner());
    out.sort_by_key(|o| o.session);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientReport {
    pub session_id: String,
    pub rounds: u64,
    pub decision: Decision,
    pub transcript_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Answers challenges with a local device built from `model` until the
/// verifier sends its decision.
pub fn run_device_client(mut stream: TcpStream, model: &DeviceModel) -> Result<ClientReport> {
    stream.set_read_timeout(Some(CLIENT_READ_TIMEOUT))?;
    stream.set_nodelay(true)?;
    let hello = read_message(&mut stream)?;
    let id = hello.session_id;
    let n = match hello.payload {
        Payload::Hello(h) => h.n,
        other => return Err(Error::Schema(format!("expected hello, got {:?}", other.message_type()))),
    };
    let mut device = make_device(model.clone(), n)?;
    let reply = Hello { n, k: None, m: None, protocol: None };
    write_message(&mut stream, &WireMessage::new(id, 0, Payload::Hello(reply)))?;
    let mut rounds = 0u64;
    loop {
        let msg = read_message(&mut stream)?;
        match msg.payload {
            Payload::Challenge(c) => match device.respond(msg.round, &c.circuit, c.k) {
                Ok(r) => {
                    write_message(&mut stream, &WireMessage::new(id, msg.round, Payload::Response(Samples { samples: r.samples })))?;
                    rounds += 1;
                }
                Err(e) => {
                    let _ = write_message(&mut stream, &WireMessage::new(id, msg.round, Payload::Error(Failure { message: e.to_string() })));
                    return Err(e);
                }
            },
            Payload::Decision(v) => {
                return Ok(ClientReport {
                    session_id: hex::encode(id),
                    rounds,
                    decision: v.decision,
                    transcript_hash: v.transcript_hash,
                    reason: v.reason,
                })
            }
            Payload::Error(f) => return Err(Error::Schema(format!("verifier reported: {}", f.message))),
            Payload::Hello(_) | Payload::Response(_) => {
                return Err(Error::Schema(format!("unexpected {:?} from verifier", msg.message_type())))
            }
        }
    }
}

pub fn connect_device(addr: impl ToSocketAddrs, model: &DeviceModel) -> Result<ClientReport> {
    run_device_client(TcpStream::connect(addr)?, model)
}

pub fn read_seed_file(path: &Path) -> Result<Vec<u8>> {
    Ok(fs::read(path)?)
}
