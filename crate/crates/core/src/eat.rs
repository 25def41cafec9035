//! Min-tradeoff functions and closed-form smooth min-entropy certificates.
//!
//! Every logarithm here is base 2.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::verifier::{Decision, ProtocolConfig, ProtocolKind, Transcript};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TradeoffKind {
    /// Pass-rate tradeoff under the long-list hardness assumption.
    LlhaQ,
    /// Score tradeoff for a device performing the ideal measurement.
    XhogIdeal,
    /// Score tradeoff for a general device.
    XhogGeneral,
    /// Any other affine map; used for limiting cases.
    Affine,
}

/// `f(x) = slope · x + intercept` on `domain`, where `x` is a score under an
/// operator scaled by `scale` (1 unless spot-check rescaled).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinTradeoff {
    pub kind: TradeoffKind,
    pub slope: f64,
    pub intercept: f64,
    pub domain: (f64, f64),
    pub scale: f64,
    /// The constructor's inputs, by name.
    pub params: Vec<(String, f64)>,
}

impl MinTradeoff {
    /// `f(q) = ((b q − 1)/(b − 1)) · B/2 − c` for `q ∈ [0, 1]`.
    pub fn llha_q(b: f64, big_b: f64, c: f64) -> Result<Self> {
        if !(b > 1.0 && b <= 2.0) {
            return Err(invalid(format!("b = {b} outside (1, 2]")));
        }
        if !(big_b >= 0.0) {
            return Err(invalid(format!("B = {big_b} < 0")));
        }
        let half = big_b / 2.0;
        Ok(Self {
            kind: TradeoffKind::LlhaQ,
            slope: b / (b - 1.0) * half,
            intercept: -half / (b - 1.0) - c,
            domain: (0.0, 1.0),
            scale: 1.0,
            params: vec![("b".into(), b), ("B".into(), big_b), ("c".into(), c)],
        })
    }

    /// `f(s) = (s − 1 − 0.01) n − c₂` for `s ∈ [0, 2]`.
    pub fn xhog_ideal(n: u32, c2: f64) -> Self {
        let nf = f64::from(n);
        Self {
            kind: TradeoffKind::XhogIdeal,
            slope: nf,
            intercept: -1.01 * nf - c2,
            domain: (0.0, 2.0),
            scale: 1.0,
            params: vec![("n".into(), nf), ("c2".into(), c2)],
        }
    }

    /// `f(s) = (1 − η)(s − 1) n − c₂ log₂ n` for `s ∈ [0, 2]`.
    pub fn xhog_general(n: u32, eta: f64, c2: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eta) {
            return Err(invalid(format!("tradeoff eta = {eta} outside [0, 1)")));
        }
        let nf = f64::from(n);
        let slope = (1.0 - eta) * nf;
        Ok(Self {
            kind: TradeoffKind::XhogGeneral,
            slope,
            intercept: -slope - c2 * nf.log2(),
            domain: (0.0, 2.0),
            scale: 1.0,
            params: vec![("n".into(), nf), ("eta".into(), eta), ("c2".into(), c2)],
        })
    }

    pub fn affine(slope: f64, intercept: f64, domain: (f64, f64)) -> Self {
        Self { kind: TradeoffKind::Affine, slope, intercept, domain, scale: 1.0, params: Vec::new() }
    }

    /// `‖∇f‖∞`
    pub fn grad_norm(&self) -> f64 {
        self.slope.abs()
    }

    /// The affine formula without the domain check.
    pub fn affine_value(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

pub fn min_tradeoff_eval(f: &MinTradeoff, x: f64) -> Result<f64> {
    let (lo, hi) = f.domain;
    if !(x >= lo && x <= hi) {
        return Err(invalid(format!("{x} outside tradeoff domain [{lo}, {hi}]")));
    }
    Ok(f.affine_value(x))
}

/// Spot-checking: the score operator is multiplied by `gamma`, so the tradeoff
/// becomes `x ↦ f(x/γ)` on the scaled domain, with gradient norm `‖∇f‖∞/γ`.
pub fn spot_check_rescale(f: &MinTradeoff, gamma: f64) -> Result<MinTradeoff> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(invalid(format!("gamma = {gamma} outside (0, 1]")));
    }
    Ok(MinTradeoff {
        slope: f.slope / gamma,
        domain: (f.domain.0 * gamma, f.domain.1 * gamma),
        scale: f.scale * gamma,
        ..f.clone()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyCertificate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolKind>,
    pub formula: String,
    pub m: u64,
    pub n: u32,
    pub tradeoff: MinTradeoff,
    /// What the transcript reported, for the record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_statistic: Option<f64>,
    /// The value fed to the tradeoff.
    pub statistic: f64,
    pub eps: f64,
    /// Lower bound on `Pr[Ω]`.
    pub p: f64,
    pub dz: u64,
    pub v: f64,
    /// `2(log₂(2 d_Z + 1) + ‖∇f‖∞)`; equals `v` unless a theorem fixes `V`.
    pub v_corollary: f64,
    pub alpha: f64,
    /// `m · f(statistic)`
    pub leading_bits: f64,
    /// `√m · V · √log₂(2/(p²ε²))`
    pub penalty_bits: f64,
    pub certified_bits: f64,
    /// True when the unspecified lower-order constants were left at zero.
    pub idealized: bool,
}

fn log2_dz(dz: u64) -> f64 {
    (dz as f64).log2()
}

/// `2(log₂(2 d_Z + 1) + ‖∇f‖∞)`
pub fn corollary_v(f: &MinTradeoff, dz: u64) -> f64 {
    2.0 * ((2.0 * dz as f64 + 1.0).log2() + f.grad_norm())
}

pub fn eat_bound(m: u64, f: &MinTradeoff, stat: f64, dz: u64, p: f64, eps: f64) -> Result<EntropyCertificate> {
    eat_bound_with_v(m, f, stat, dz, p, eps, None)
}

fn eat_bound_with_v(
    m: u64,
    f: &MinTradeoff,
    stat: f64,
    dz: u64,
    p: f64,
    eps: f64,
    v_override: Option<f64>,
) -> Result<EntropyCertificate> {
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("p = {p} outside (0, 1]")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps = {eps} outside (0, 1)")));
    }
    if dz < 2 {
        return Err(invalid(format!("alphabet size {dz} < 2")));
    }
    let value = min_tradeoff_eval(f, stat)?;
    let v_corollary = corollary_v(f, dz);
    let v = v_override.unwrap_or(v_corollary);
    let log_term = (2.0 / (p * p * eps * eps)).log2();
    let mf = m as f64;
    let alpha = 1.0 + (4.0 / (mf * v * v) * log_term).sqrt();
    let upper = 1.0 + 2.0 / v;
    if !(alpha > 1.0 && alpha < upper) {
        return Err(Error::AlphaOutOfWindow { m, alpha, upper });
    }
    let leading_bits = mf * value;
    let penalty_bits = mf.sqrt() * v * log_term.sqrt();
    let cap = mf * log2_dz(dz);
    Ok(EntropyCertificate {
        protocol: None,
        formula: "eat-corollary".into(),
        m,
        n: log2_dz(dz).round() as u32,
        tradeoff: f.clone(),
        observed_statistic: None,
        statistic: stat,
        eps,
        p,
        dz,
        v,
        v_corollary,
        alpha,
        leading_bits,
        penalty_bits,
        certified_bits: (leading_bits - penalty_bits).clamp(0.0, cap),
        idealized: f.params.iter().filter(|(k, _)| k == "c" || k == "c2").all(|(_, v)| *v == 0.0),
    })
}

/// Applies the certificate theorem matching `config.kind`, conditioned on the
/// run having been accepted. The tradeoff is evaluated at the acceptance
/// threshold (the pass fraction for llha, `1 + δ` capped at `s_max` for the
/// score protocols); `observed` is carried along for the record.
pub fn certificate_for_protocol(config: &ProtocolConfig, observed: Option<f64>) -> Result<EntropyCertificate> {
    config.validate()?;
    let n = config.n;
    let nf = f64::from(n);
    let dz = config.dim();
    let knobs = &config.certificate;
    let (f, stat, v, formula) = match config.kind {
        ProtocolKind::Llha => {
            let b = config.threshold;
            let big_b = 2.0 * knobs.beta * nf;
            let f = MinTradeoff::llha_q(b, big_b, knobs.c)?;
            let v = (nf + 1.0) + b / (b - 1.0) * big_b / 2.0;
            (f, config.pass_fraction, Some(v), "llha-theorem")
        }
        ProtocolKind::Ideal => {
            let f = MinTradeoff::xhog_ideal(n, knobs.c2);
            let v = (4.01 * nf).max(corollary_v(&f, dz));
            (f, config.threshold.min(config.s_max), Some(v), "ideal-theorem")
        }
        ProtocolKind::Full => {
            let f = MinTradeoff::xhog_general(n, knobs.tradeoff_eta, knobs.c2)?;
            let v = (3.99 * nf).max(corollary_v(&f, dz));
            (f, config.threshold.min(config.s_max), Some(v), "full-theorem")
        }
    };
    let mut cert = eat_bound_with_v(config.m, &f, stat, dz, config.completeness_floor, config.smoothing_eps, v)?;
    cert.protocol = Some(config.kind);
    cert.formula = formula.into();
    cert.n = n;
    cert.observed_statistic = observed;
    Ok(cert)
}

/// The observed statistic is reported in score units: `W/t` for llha and the
/// normalized mean score for the score protocols.
pub fn certify_transcript(transcript: &Transcript) -> Result<EntropyCertificate> {
    if transcript.decision() != Decision::Accept {
        return Err(Error::NotAccepted(transcript.decision().as_str().into()));
    }
    let config = &transcript.header.config;
    let observed = match config.kind {
        ProtocolKind::Llha => transcript.trailer.statistic,
        _ => transcript.trailer.mean_normalized_score,
    };
    certificate_for_protocol(config, observed)
}
