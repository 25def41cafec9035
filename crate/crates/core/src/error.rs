use thiserror::Error;

/// Errors produced anywhere in the certified-randomness pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported qubit count {n} for ensemble {ensemble} (allowed {min}..={max})")]
    UnsupportedQubits {
        ensemble: String,
        n: u32,
        min: u32,
        max: u32,
    },

    #[error("memory guard: {0}")]
    MemoryGuard(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("not a distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("prf counter exhausted for label {0:?}")]
    CounterOverflow(String),

    #[error("sample {sample} out of range for n = {n}")]
    SampleOutOfRange { sample: u64, n: u32 },

    #[error("responses reference different circuits")]
    MixedCircuits,

    #[error("unknown lemma id {0:?}")]
    UnknownLemma(String),

    #[error("m = {m} too small for the requested (p, eps): optimal alpha {alpha} outside (1, {upper})")]
    AlphaOutOfWindow { m: u64, alpha: f64, upper: f64 },

    #[error("transcript was not accepted: {0}")]
    NotAccepted(String),

    #[error("infeasible design: {0}")]
    InfeasibleDesign(String),

    #[error("frame too large: {0} bytes")]
    FrameTooLarge(usize),

    #[error("malformed frame: {0}")]
    MalformedFrame(String),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("corrupt transcript: {0}")]
    CorruptTranscript(String),

    #[error("timeout: {0}")]
    Timeout(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
