//! JSONL persistence: a header line, one line per round, and a trailer line
//! carrying the decision and the SHA-256 of everything before it.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::simcore::Circuit;
use crate::verifier::config::ProtocolConfig;

pub const TRANSCRIPT_FORMAT: &str = "certrand-transcript/v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Accept,
    Abort,
    ProtocolError,
    Timeout,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Accept => "accept",
            Decision::Abort => "abort",
            Decision::ProtocolError => "protocol-error",
            Decision::Timeout => "timeout",
        }
    }

    pub fn is_error(self) -> bool {
        matches!(self, Decision::ProtocolError | Decision::Timeout)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub config: ProtocolConfig,
    pub session: u64,
    pub session_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundRecord {
    pub round: u64,
    pub epoch: u64,
    pub circuit: Circuit,
    /// `T_i`: the next round gets a fresh circuit.
    pub refresh: bool,
    /// `T_i` for llha, `F_i` for full, the spot-check coin for ideal.
    pub test: bool,
    pub samples: Vec<u64>,
    /// Raw score on test rounds: the batch LXEB mean for llha, `p_C(z)` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    /// `W_i` on llha test rounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochSummary {
    pub epoch: u64,
    pub rounds: u64,
    pub tests: u64,
    /// Mean raw score over the epoch's test rounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    /// Whether the epoch enters the full protocol's pass fraction.
    pub counted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trailer {
    pub rounds_run: u64,
    pub tests: u64,
    pub epochs: Vec<EpochSummary>,
    pub decision: Decision,
    /// `W/t` for llha, raw `s` for ideal, passing-epoch fraction for full.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<f64>,
    /// `N` times the mean raw score over all test rounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_normalized_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "line", rename_all = "lowercase")]
enum Line {
    Header(Header),
    Round(RoundRecord),
    Trailer(Trailer),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub header: Header,
    pub rounds: Vec<RoundRecord>,
    pub trailer: Trailer,
}

fn encode(line: &Line) -> String {
    serde_json::to_string(line).expect("transcript lines serialize")
}

fn trailer_body(trailer: &Trailer) -> String {
    encode(&Line::Trailer(Trailer { hash: None, ..trailer.clone() }))
}

fn digest<'a>(lines: impl IntoIterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    for line in lines {
        h.update(line.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

impl Transcript {
    /// Builds a transcript and stamps its hash.
    pub fn new(header: Header, rounds: Vec<RoundRecord>, trailer: Trailer) -> Self {
        let mut t = Self { header, rounds, trailer };
        t.trailer.hash = Some(t.compute_hash());
        t
    }

    pub fn decision(&self) -> Decision {
        self.trailer.decision
    }

    pub fn hash(&self) -> &str {
        self.trailer.hash.as_deref().unwrap_or("")
    }

    fn body_lines(&self) -> Vec<String> {
        let mut lines = Vec::with_capacity(self.rounds.len() + 2);
        lines.push(encode(&Line::Header(self.header.clone())));
        lines.extend(self.rounds.iter().map(|r| encode(&Line::Round(r.clone()))));
        lines.push(trailer_body(&self.trailer));
        lines
    }

    pub fn compute_hash(&self) -> String {
        let lines = self.body_lines();
        digest(lines.iter().map(String::as_str))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut lines = self.body_lines();
        lines.pop();
        for line in lines {
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str(&encode(&Line::Trailer(self.trailer.clone())));
        out.push('\n');
        out
    }

    /// Parses a transcript and returns it with the hash recomputed from the
    /// file's own bytes.
    pub fn from_jsonl(text: &str) -> Result<(Self, String)> {
        let raw: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if raw.len() < 2 {
            return Err(Error::CorruptTranscript(format!("{} lines; need a header and a trailer", raw.len())));
        }
        let parse = |i: usize| -> Result<Line> {
            serde_json::from_str(raw[i]).map_err(|e| Error::CorruptTranscript(format!("line {}: {e}", i + 1)))
        };
        let header = match parse(0)? {
            Line::Header(h) => h,
            _ => return Err(Error::CorruptTranscript("first line is not a header".into())),
        };
        if header.format != TRANSCRIPT_FORMAT {
            return Err(Error::CorruptTranscript(format!("unknown format {:?}", header.format)));
        }
        let last = raw.len() - 1;
        let trailer = match parse(last)? {
            Line::Trailer(t) => t,
            _ => return Err(Error::CorruptTranscript("last line is not a trailer".into())),
        };
        let mut rounds = Vec::with_capacity(last - 1);
        for i in 1..last {
            match parse(i)? {
                Line::Round(r) => rounds.push(r),
                _ => return Err(Error::CorruptTranscript(format!("line {} is not a round", i + 1))),
            }
        }
        let body = trailer_body(&trailer);
        let hash = digest(raw[..last].iter().copied().chain(std::iter::once(body.as_str())));
        Ok((Self { header, rounds, trailer }, hash))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<(Self, String)> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }
}
