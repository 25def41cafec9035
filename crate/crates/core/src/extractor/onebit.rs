//! Reed–Solomon ∘ Hadamard bit selection.
//!
//! The source is split into `L` symbols of `s` bits, read as the coefficients
//! of a polynomial over GF(2^s). The seed `(y₁, y₂)` picks the evaluation point
//! `y₁` and the output is `⟨RS(x)(y₁), y₂⟩ mod 2`.
//!
//! For `x ≠ x'` the outputs collide with probability at most
//! `(1 + (L − 1)/2^s)/2` over the seed, so by the leftover hash lemma a source
//! with min-entropy `k` gives error at most `½√((L − 1)/2^s + 2^{1−k})`.

use crate::error::{invalid, Error, Result};
use crate::extractor::gf2::Gf2w;

pub const MAX_SYMBOL_BITS: u32 = 128;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OneBitExtractor {
    source_len: usize,
    field: Gf2w,
}

impl OneBitExtractor {
    pub fn new(source_len: usize, symbol_bits: u32) -> Result<Self> {
        if source_len == 0 {
            return Err(invalid("empty source"));
        }
        if !(1..=MAX_SYMBOL_BITS).contains(&symbol_bits) {
            return Err(invalid(format!("symbol width {symbol_bits} outside [1, {MAX_SYMBOL_BITS}]")));
        }
        Ok(Self { source_len, field: Gf2w::new(symbol_bits)? })
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn symbol_bits(&self) -> u32 {
        self.field.width()
    }

    pub fn symbols(&self) -> usize {
        self.source_len.div_ceil(self.symbol_bits() as usize)
    }

    pub fn seed_len(&self) -> usize {
        2 * self.symbol_bits() as usize
    }

    /// Packs the source into field elements; bit `b` of a chunk is the
    /// coefficient of `2^b`.
    pub fn symbolize(&self, x: &[bool]) -> Result<Vec<u128>> {
        if x.len() != self.source_len {
            return Err(Error::LengthMismatch { expected: self.source_len, actual: x.len() });
        }
        Ok(x.chunks(self.symbol_bits() as usize).map(pack).collect())
    }

    pub fn extract_symbols(&self, symbols: &[u128], y: &[bool]) -> Result<bool> {
        if y.len() != self.seed_len() {
            return Err(Error::LengthMismatch { expected: self.seed_len(), actual: y.len() });
        }
        let s = self.symbol_bits() as usize;
        let (y1, y2) = (pack(&y[..s]), pack(&y[s..]));
        let codeword = self.field.eval(symbols, y1);
        Ok((codeword & y2).count_ones() % 2 == 1)
    }

    pub fn extract(&self, x: &[bool], y: &[bool]) -> Result<bool> {
        self.extract_symbols(&self.symbolize(x)?, y)
    }

    /// `½√((L − 1)/2^s + 2^{1−k})`
    pub fn error_bound(&self, min_entropy: f64) -> f64 {
        let l = self.symbols() as f64;
        0.5 * ((l - 1.0) / 2f64.powi(self.symbol_bits() as i32) + 2f64.powf(1.0 - min_entropy)).sqrt()
    }
}

fn pack(bits: &[bool]) -> u128 {
    bits.iter().enumerate().fold(0u128, |acc, (i, &b)| acc | (u128::from(b) << i))
}

/// One output bit with the symbol width read off the seed (`|y| = 2s`).
pub fn one_bit_extract(x: &[bool], y: &[bool]) -> Result<bool> {
    if y.len() % 2 != 0 {
        return Err(invalid(format!("seed length {} is odd", y.len())));
    }
    OneBitExtractor::new(x.len(), (y.len() / 2) as u32)?.extract(x, y)
}

/// Smallest power-of-two symbol width `s ≥ 2` with `(L − 1)/2^s ≤ 2ε²`, and the
/// entropy `k = ⌈2 log₂(1/ε)⌉` that makes the error at most `ε`.
pub fn one_bit_params(source_len: usize, eps: f64) -> Result<(u32, f64)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps = {eps} outside (0, 1)")));
    }
    let mut s = 2u32;
    loop {
        let l = source_len.div_ceil(s as usize) as f64;
        if (l - 1.0) / 2f64.powi(s as i32) <= 2.0 * eps * eps {
            break;
        }
        s *= 2;
        if s > MAX_SYMBOL_BITS {
            return Err(Error::InfeasibleDesign(format!("no symbol width ≤ {MAX_SYMBOL_BITS} reaches eps = {eps}")));
        }
    }
    Ok((s, (2.0 * (1.0 / eps).log2()).ceil().max(1.0)))
}
