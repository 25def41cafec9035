//! Seeded extraction: the one-bit code extractor run on every set of a weak
//! design, so output bit `i` reads only the seed bits indexed by `S_i`.
//!
//! A source of min-entropy `k + r·m + log₂(1/ε)` yields `m` bits within
//! `6m√ε` of uniform, also against quantum side information.

mod design;
mod gf2;
mod onebit;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use design::{build_weak_design, DesignKind, WeakDesign, MAX_R};
pub use gf2::{is_irreducible, Gf2w};
pub use onebit::{one_bit_extract, one_bit_params, OneBitExtractor, MAX_SYMBOL_BITS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "SpecRecord", try_from = "SpecRecord")]
pub struct ExtractorSpec {
    pub source_len: usize,
    pub m: usize,
    /// Per-bit error of the one-bit extractor.
    pub eps: f64,
    /// Symbol width of the inner code; the one-bit seed has `t = 2s` bits.
    pub s: u32,
    pub t: usize,
    /// Min-entropy the one-bit extractor needs for error `eps`.
    pub k_one_bit: f64,
    pub design: DesignKind,
    pub d: usize,
    pub r: f64,
}

impl ExtractorSpec {
    pub fn required_entropy(&self) -> f64 {
        self.k_one_bit + self.r * self.m as f64 + (1.0 / self.eps).log2()
    }

    pub fn total_error(&self) -> f64 {
        6.0 * self.m as f64 * self.eps.sqrt()
    }

    pub fn check_budget(&self, min_entropy: f64) -> Result<()> {
        if self.required_entropy() > min_entropy {
            return Err(Error::InfeasibleDesign(format!(
                "{} output bits need {:.1} bits of min-entropy, budget is {:.1}",
                self.m,
                self.required_entropy(),
                min_entropy
            )));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRecord {
    source_len: usize,
    m: usize,
    eps: f64,
    s: u32,
    t: usize,
    k_one_bit: f64,
    design: DesignKind,
    d: usize,
    r: f64,
    required_entropy: f64,
    total_error: f64,
}

impl From<ExtractorSpec> for SpecRecord {
    fn from(x: ExtractorSpec) -> Self {
        Self {
            required_entropy: x.required_entropy(),
            total_error: x.total_error(),
            source_len: x.source_len,
            m: x.m,
            eps: x.eps,
            s: x.s,
            t: x.t,
            k_one_bit: x.k_one_bit,
            design: x.design,
            d: x.d,
            r: x.r,
        }
    }
}

impl TryFrom<SpecRecord> for ExtractorSpec {
    type Error = String;

    fn try_from(x: SpecRecord) -> std::result::Result<Self, String> {
        let spec = ExtractorSpec {
            source_len: x.source_len,
            m: x.m,
            eps: x.eps,
            s: x.s,
            t: x.t,
            k_one_bit: x.k_one_bit,
            design: x.design,
            d: x.d,
            r: x.r,
        };
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        if !close(x.required_entropy, spec.required_entropy()) || !close(x.total_error, spec.total_error()) {
            return Err("stored guarantee does not match the parameters".into());
        }
        Ok(spec)
    }
}

#[derive(Clone, Debug)]
pub struct Extractor {
    pub spec: ExtractorSpec,
    pub design: WeakDesign,
    pub onebit: OneBitExtractor,
}

impl Extractor {
    pub fn new(source_len: usize, m: usize, eps: f64) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m = 0"));
        }
        let (s, k_one_bit) = one_bit_params(source_len, eps)?;
        Self::with_symbol_bits(source_len, m, eps, s, k_one_bit)
    }

    /// Fixed symbol width, for micro instances where the automatic choice
    /// would be larger than the source.
    pub fn with_symbol_bits(source_len: usize, m: usize, eps: f64, s: u32, k_one_bit: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid(format!("eps = {eps} outside (0, 1)")));
        }
        let onebit = OneBitExtractor::new(source_len, s)?;
        let design = build_weak_design(m, onebit.seed_len())?;
        let spec = ExtractorSpec {
            source_len,
            m,
            eps,
            s,
            t: design.t,
            k_one_bit,
            design: design.kind,
            d: design.d,
            r: design.r,
        };
        Ok(Self { spec, design, onebit })
    }

    pub fn from_spec(spec: &ExtractorSpec) -> Result<Self> {
        let built = Self::with_symbol_bits(spec.source_len, spec.m, spec.eps, spec.s, spec.k_one_bit)?;
        if built.spec != *spec {
            return Err(invalid("spec does not match the design it names"));
        }
        Ok(built)
    }

    pub fn seed_len(&self) -> usize {
        self.design.d
    }

    pub fn extract(&self, x: &[bool], y: &[bool]) -> Result<Vec<bool>> {
        if y.len() != self.design.d {
            return Err(Error::LengthMismatch { expected: self.design.d, actual: y.len() });
        }
        let symbols = self.onebit.symbolize(x)?;
        self.design
            .sets
            .iter()
            .map(|set| {
                let restricted: Vec<bool> = set.iter().map(|&j| y[j]).collect();
                self.onebit.extract_symbols(&symbols, &restricted)
            })
            .collect()
    }
}

/// Picks the code from `(source_len, eps)`, builds the design and refuses
/// outputs the source cannot support even at full entropy.
pub fn extractor_params(source_len: usize, target_m: usize, eps: f64) -> Result<Extractor> {
    let ext = Extractor::new(source_len, target_m, eps)?;
    ext.spec.check_budget(source_len as f64)?;
    Ok(ext)
}

pub fn trevisan_extract(x: &[bool], y: &[bool], ext: &Extractor) -> Result<Vec<bool>> {
    ext.extract(x, y)
}

pub fn bits_from_bytes(bytes: &[u8], nbits: usize) -> Result<Vec<bool>> {
    if nbits > 8 * bytes.len() {
        return Err(Error::LengthMismatch { expected: nbits.div_ceil(8), actual: bytes.len() });
    }
    Ok((0..nbits).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1 == 1).collect())
}

pub fn bytes_from_bits(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << (7 - i))))
        .collect()
}

/// Each sample contributes its `n` bits, most significant first.
pub fn samples_to_bits(samples: &[u64], n: u32) -> Vec<bool> {
    samples
        .iter()
        .flat_map(|&z| (0..n).rev().map(move |b| (z >> b) & 1 == 1))
        .collect()
}
