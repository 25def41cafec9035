use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::prf::Key32;
use crate::simcore::Ensemble;
use crate::verifier::scoring::DuplicateMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Llha,
    Ideal,
    Full,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Llha => "llha",
            ProtocolKind::Ideal => "ideal",
            ProtocolKind::Full => "full",
        }
    }
}

/// Knobs for the entropy certificate. The unspecified lower-order constants
/// default to zero, which makes the certificate an idealized bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateKnobs {
    /// Intercept `c` of the pass-rate tradeoff.
    pub c: f64,
    /// Intercept `c₂` of the score tradeoffs.
    pub c2: f64,
    /// Slack `η` in the general score tradeoff `(1 − η)(s − 1)n`.
    pub tradeoff_eta: f64,
    /// `β = B/(2n)`, the hardness-assumption advice fraction used by the
    /// pass-rate tradeoff.
    pub beta: f64,
}

impl Default for CertificateKnobs {
    fn default() -> Self {
        Self { c: 0.0, c2: 0.0, tradeoff_eta: 0.01, beta: 0.245 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    pub n: u32,
    /// Rounds.
    pub m: u64,
    /// Samples per response; must be 1 for `ideal` and `full`.
    #[serde(default = "one")]
    pub k: usize,
    /// `b` for `llha`, `1 + δ` for `ideal` and `full`.
    pub threshold: f64,
    /// Circuit-refresh rate for `llha` and `full`; test rate for `ideal`.
    pub gamma: f64,
    /// Test-round rate for `full`.
    #[serde(default = "unit")]
    pub eta: f64,
    #[serde(default = "default_pass_fraction")]
    pub pass_fraction: f64,
    pub master_key: Key32,
    #[serde(default = "default_ensemble")]
    pub ensemble: Ensemble,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    /// Smoothing parameter ε of the certificate.
    #[serde(default = "default_smoothing")]
    pub smoothing_eps: f64,
    /// A-priori lower bound on the acceptance probability.
    #[serde(default = "default_completeness")]
    pub completeness_floor: f64,
    #[serde(default)]
    pub duplicate_mode: DuplicateMode,
    /// `full` epochs with fewer test rounds are left out of the pass fraction.
    #[serde(default = "one_u64")]
    pub min_epoch_tests: u64,
    /// Normalized scores are clamped to `[0, s_max]` before certification.
    #[serde(default = "default_s_max")]
    pub s_max: f64,
    #[serde(default)]
    pub certificate: CertificateKnobs,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
}

fn one() -> usize {
    1
}
fn one_u64() -> u64 {
    1
}
fn unit() -> f64 {
    1.0
}
fn default_pass_fraction() -> f64 {
    0.99
}
fn default_ensemble() -> Ensemble {
    Ensemble::HaarColumn
}
fn default_smoothing() -> f64 {
    2f64.powi(-32)
}
fn default_completeness() -> f64 {
    0.9
}
fn default_s_max() -> f64 {
    2.0
}
fn default_timeout() -> u64 {
    1000
}

impl ProtocolConfig {
    /// A configuration with every optional field at its default.
    pub fn new(kind: ProtocolKind, n: u32, m: u64, threshold: f64, gamma: f64, master_key: Key32) -> Self {
        Self {
            kind,
            n,
            m,
            k: 1,
            threshold,
            gamma,
            eta: 1.0,
            pass_fraction: default_pass_fraction(),
            master_key,
            ensemble: default_ensemble(),
            depth: None,
            smoothing_eps: default_smoothing(),
            completeness_floor: default_completeness(),
            duplicate_mode: DuplicateMode::default(),
            min_epoch_tests: 1,
            s_max: default_s_max(),
            certificate: CertificateKnobs::default(),
            timeout_ms: default_timeout(),
        }
    }

    pub fn dim(&self) -> u64 {
        1u64 << self.n
    }

    /// `δ = threshold − 1` for the score protocols.
    pub fn delta(&self) -> f64 {
        self.threshold - 1.0
    }

    pub fn validate(&self) -> Result<()> {
        let unit_open = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} = {v} outside (0, 1]")))
            }
        };
        if !(self.threshold > 1.0 && self.threshold <= 2.0) {
            return Err(invalid(format!("threshold = {} outside (1, 2]", self.threshold)));
        }
        unit_open("gamma", self.gamma)?;
        unit_open("eta", self.eta)?;
        unit_open("pass_fraction", self.pass_fraction)?;
        if self.m == 0 {
            return Err(invalid("m must be at least 1"));
        }
        if self.k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if self.kind != ProtocolKind::Llha && self.k != 1 {
            return Err(invalid(format!("{} protocol takes one sample per round, got k = {}", self.kind.as_str(), self.k)));
        }
        if !(self.smoothing_eps > 0.0 && self.smoothing_eps < 1.0) {
            return Err(invalid(format!("smoothing_eps = {} outside (0, 1)", self.smoothing_eps)));
        }
        unit_open("completeness_floor", self.completeness_floor)?;
        if !(self.s_max >= 1.0) {
            return Err(invalid(format!("s_max = {} < 1", self.s_max)));
        }
        if self.min_epoch_tests == 0 {
            return Err(invalid("min_epoch_tests must be at least 1"));
        }
        if self.timeout_ms == 0 {
            return Err(invalid("timeout_ms must be positive"));
        }
        crate::simcore::Circuit::new(self.ensemble, self.n, self.master_key, self.depth).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let json = format!(
            r#"{{"kind":"full","n":8,"m":100,"threshold":1.5,"gamma":0.01,"master_key":"{}"}}"#,
            "11".repeat(32)
        );
        let c: ProtocolConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(c, ProtocolConfig::new(ProtocolKind::Full, 8, 100, 1.5, 0.01, Key32::filled(0x11)));
        c.validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range() {
        let base = ProtocolConfig::new(ProtocolKind::Llha, 8, 10, 1.5, 0.1, Key32::filled(0));
        for f in [
            |c: &mut ProtocolConfig| c.threshold = 1.0,
            |c: &mut ProtocolConfig| c.threshold = 2.1,
            |c: &mut ProtocolConfig| c.gamma = 0.0,
            |c: &mut ProtocolConfig| c.eta = 1.5,
            |c: &mut ProtocolConfig| c.m = 0,
            |c: &mut ProtocolConfig| c.pass_fraction = 0.0,
            |c: &mut ProtocolConfig| c.n = 40,
        ] {
            let mut c = base.clone();
            f(&mut c);
            assert!(c.validate().is_err(), "{c:?}");
        }
        let mut c = base.clone();
        c.kind = ProtocolKind::Full;
        c.k = 4;
        assert!(c.validate().is_err());
    }
}
