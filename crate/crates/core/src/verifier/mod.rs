//! LXEB scoring, the protocol engines and transcripts.

pub mod config;
pub mod protocol;
pub mod scoring;
pub mod transcript;

pub use config::{CertificateKnobs, ProtocolConfig, ProtocolKind};
pub use protocol::{failed_session, evaluate, replay, replay_transcript, run_protocol, session_id, session_key, ReplayReport, Schedule};
pub use scoring::{duplicate_check, lxeb_check, lxeb_score, DuplicateMode, LxebScore};
pub use transcript::{Decision, RoundRecord, Transcript, Trailer};
