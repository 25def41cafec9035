//! Frames between verifier and device: a 4-byte big-endian length, then one
//! JSON object with sorted keys.

use std::io::{ErrorKind, Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::simcore::Circuit;
use crate::verifier::{Decision, ProtocolKind};

pub const MAX_FRAME: usize = 16 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageType {
    Hello,
    Challenge,
    Response,
    Decision,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    pub n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Challenge {
    pub circuit: Circuit,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Samples {
    pub samples: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verdict {
    pub decision: Decision,
    pub transcript_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Failure {
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Hello(Hello),
    Challenge(Challenge),
    Response(Samples),
    Decision(Verdict),
    Error(Failure),
}

impl Payload {
    pub fn message_type(&self) -> MessageType {
        match self {
            Payload::Hello(_) => MessageType::Hello,
            Payload::Challenge(_) => MessageType::Challenge,
            Payload::Response(_) => MessageType::Response,
            Payload::Decision(_) => MessageType::Decision,
            Payload::Error(_) => MessageType::Error,
        }
    }

    fn to_value(&self) -> Value {
        let v = match self {
            Payload::Hello(x) => serde_json::to_value(x),
            Payload::Challenge(x) => serde_json::to_value(x),
            Payload::Response(x) => serde_json::to_value(x),
            Payload::Decision(x) => serde_json::to_value(x),
            Payload::Error(x) => serde_json::to_value(x),
        };
        v.expect("payload records always serialize")
    }

    fn from_value(kind: MessageType, v: Value) -> Result<Self> {
        let schema = |e: serde_json::Error| Error::Schema(format!("{kind:?} payload: {e}"));
        Ok(match kind {
            MessageType::Hello => Payload::Hello(serde_json::from_value(v).map_err(schema)?),
            MessageType::Challenge => Payload::Challenge(serde_json::from_value(v).map_err(schema)?),
            MessageType::Response => Payload::Response(serde_json::from_value(v).map_err(schema)?),
            MessageType::Decision => Payload::Decision(serde_json::from_value(v).map_err(schema)?),
            MessageType::Error => Payload::Error(serde_json::from_value(v).map_err(schema)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WireMessage {
    pub session_id: [u8; 16],
    pub round: u64,
    pub payload: Payload,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Frame {
    #[serde(rename = "type")]
    kind: MessageType,
    session_id: String,
    round: u64,
    payload: Value,
}

impl WireMessage {
    pub fn new(session_id: [u8; 16], round: u64, payload: Payload) -> Self {
        Self { session_id, round, payload }
    }

    pub fn message_type(&self) -> MessageType {
        self.payload.message_type()
    }

    /// The JSON body; keys come out sorted because `Value` maps are ordered.
    pub fn to_json(&self) -> Vec<u8> {
        let frame = Frame {
            kind: self.message_type(),
            session_id: hex::encode(self.session_id),
            round: self.round,
            payload: self.payload.to_value(),
        };
        let value = serde_json::to_value(frame).expect("frames always serialize");
        serde_json::to_vec(&value).expect("values always serialize")
    }

    pub fn from_json(body: &[u8]) -> Result<Self> {
        let value: Value = serde_json::from_slice(body).map_err(|e| Error::MalformedFrame(e.to_string()))?;
        let frame: Frame = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
        let id = hex::decode(&frame.session_id).map_err(|e| Error::Schema(format!("session id: {e}")))?;
        let session_id: [u8; 16] =
            id.try_into().map_err(|_| Error::Schema("session id is not 16 bytes".into()))?;
        Ok(Self { session_id, round: frame.round, payload: Payload::from_value(frame.kind, frame.payload)? })
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let body = self.to_json();
        if body.len() > MAX_FRAME {
            return Err(Error::FrameTooLarge(body.len()));
        }
        let mut out = Vec::with_capacity(4 + body.len());
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
        Ok(out)
    }

    /// Decodes exactly one frame; trailing bytes are an error.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        let msg = read_message(&mut cursor)?;
        if !cursor.is_empty() {
            return Err(Error::MalformedFrame(format!("{} trailing bytes", cursor.len())));
        }
        Ok(msg)
    }
}

fn io_error(e: std::io::Error) -> Error {
    match e.kind() {
        ErrorKind::WouldBlock | ErrorKind::TimedOut => Error::Timeout(e.to_string()),
        ErrorKind::UnexpectedEof => Error::MalformedFrame("truncated frame".into()),
        _ => Error::Io(e),
    }
}

pub fn write_message(w: &mut impl Write, msg: &WireMessage) -> Result<()> {
    w.write_all(&msg.encode()?).map_err(io_error)?;
    w.flush().map_err(io_error)
}

pub fn read_message(r: &mut impl Read) -> Result<WireMessage> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len).map_err(io_error)?;
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(Error::FrameTooLarge(len));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).map_err(io_error)?;
    WireMessage::from_json(&body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prf::Key32;
    use crate::simcore::Ensemble;

    fn challenge() -> WireMessage {
        let circuit = Circuit::new(Ensemble::HaarColumn, 4, Key32::filled(3), None).unwrap();
        WireMessage::new([7; 16], 0, Payload::Challenge(Challenge { circuit, k: 1 }))
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let msg = challenge();
        let bytes = msg.encode().unwrap();
        let back = WireMessage::decode(&bytes).unwrap();
        assert_eq!(back, msg);
        assert_eq!(back.encode().unwrap(), bytes);
        assert_eq!(challenge().encode().unwrap(), bytes);
    }

    #[test]
    fn keys_are_sorted() {
        let text = String::from_utf8(challenge().to_json()).unwrap();
        let order: Vec<usize> = ["\"payload\"", "\"round\"", "\"session_id\"", "\"type\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]), "{text}");
    }

    #[test]
    fn truncated_frame() {
        let bytes = challenge().encode().unwrap();
        assert!(matches!(WireMessage::decode(&bytes[..bytes.len() - 1]), Err(Error::MalformedFrame(_))));
        assert!(matches!(WireMessage::decode(&bytes[..2]), Err(Error::MalformedFrame(_))));
    }

    #[test]
    fn oversize_frame() {
        let mut bytes = ((MAX_FRAME + 1) as u32).to_be_bytes().to_vec();
        bytes.extend_from_slice(b"{}");
        assert!(matches!(WireMessage::decode(&bytes), Err(Error::FrameTooLarge(_))));
    }

    #[test]
    fn schema_violations() {
        let frame = |body: &str| {
            let mut b = (body.len() as u32).to_be_bytes().to_vec();
            b.extend_from_slice(body.as_bytes());
            WireMessage::decode(&b)
        };
        let id = "00".repeat(16);
        assert!(matches!(frame("{not json"), Err(Error::MalformedFrame(_))));
        let unknown = format!(r#"{{"type":"gossip","session_id":"{id}","round":0,"payload":{{}}}}"#);
        assert!(matches!(frame(&unknown), Err(Error::Schema(_))));
        let wrong = format!(r#"{{"type":"response","session_id":"{id}","round":0,"payload":{{"n":3}}}}"#);
        assert!(matches!(frame(&wrong), Err(Error::Schema(_))));
        let short = r#"{"type":"response","session_id":"00","round":0,"payload":{"samples":[]}}"#;
        assert!(matches!(frame(short), Err(Error::Schema(_))));
        let ok = format!(r#"{{"type":"response","session_id":"{id}","round":5,"payload":{{"samples":[1,2]}}}}"#);
        assert_eq!(frame(&ok).unwrap().payload, Payload::Response(Samples { samples: vec![1, 2] }));
    }
}
