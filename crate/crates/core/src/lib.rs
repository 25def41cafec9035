//! Certified randomness from random circuit sampling at desk scale.
//!
//! Challenge circuits are derived from a keyed stream, devices answer them with
//! samples, the verifier scores the samples, an entropy certificate bounds the
//! smooth min-entropy of an accepted run, and a Trevisan extractor turns the
//! samples into nearly uniform bits.

pub mod devices;
pub mod eat;
pub mod error;
pub mod extractor;
pub mod net;
pub mod prf;
pub mod reductions;
pub mod sampling;
pub mod simcore;
pub mod statlab;
pub mod verifier;
pub mod wire;

pub use error::{Error, Result};
pub use prf::{derive_key, prf_block, Key32, PrfRng, PrfStream};
pub use simcore::{derive_circuit, output_distribution, Circuit, Ensemble, OutputDistribution};
pub use devices::{make_device, Device, DeviceKind, DeviceModel, Responder, Response};
pub use statlab::{DensityMatrix, Dist, OracleReport};
pub use verifier::{run_protocol, Decision, ProtocolConfig, ProtocolKind, Transcript};
pub use eat::{certificate_for_protocol, certify_transcript, eat_bound, EntropyCertificate, MinTradeoff};
pub use extractor::{extractor_params, trevisan_extract, Extractor, ExtractorSpec, WeakDesign};
pub use net::{connect_device, extract_from_transcript, run_device_client, run_verifier_service, ServiceOptions, SessionOutcome};
pub use wire::{Payload, WireMessage};
