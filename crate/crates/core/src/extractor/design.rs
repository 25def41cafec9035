use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::gf2::Gf2w;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "construction")]
pub enum DesignKind {
    /// `S_i = {i·t, …, i·t + t − 1}`, `d = m·t`.
    Disjoint,
    /// `S_i = {(a, p_i(a)) : a ∈ GF(t)}` for the `i`-th polynomial of degree
    /// at most `degree`, `d = t²`.
    Polynomial { degree: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakDesign {
    pub kind: DesignKind,
    pub d: usize,
    pub t: usize,
    pub m: usize,
    pub sets: Vec<Vec<usize>>,
    /// Smallest `r ≥ 1` with `Σ_{j<i} 2^{|S_i ∩ S_j|} ≤ r·m` for every `i`.
    pub r: f64,
}

/// Largest admissible overlap parameter, `2e`.
pub const MAX_R: f64 = 2.0 * std::f64::consts::E;

pub fn build_weak_design(m: usize, t: usize) -> Result<WeakDesign> {
    if m == 0 {
        return Err(Error::InfeasibleDesign("m = 0".into()));
    }
    if t < 2 || !t.is_power_of_two() {
        return Err(Error::InfeasibleDesign(format!("set size {t} is not a power of two ≥ 2")));
    }
    let (kind, d, sets) = if m <= t {
        let sets = (0..m).map(|i| (i * t..(i + 1) * t).collect()).collect();
        (DesignKind::Disjoint, m * t, sets)
    } else {
        if t > 1 << 16 {
            return Err(Error::InfeasibleDesign(format!("t = {t} too large for a polynomial design")));
        }
        let width = t.trailing_zeros();
        let field = Gf2w::new(width).map_err(|e| Error::InfeasibleDesign(e.to_string()))?;
        let mut coeffs_needed = 1u32;
        while (t as u128).pow(coeffs_needed) < m as u128 {
            coeffs_needed += 1;
        }
        let sets = (0..m)
            .map(|i| {
                let mut coeffs = Vec::with_capacity(coeffs_needed as usize);
                let mut rest = i;
                for _ in 0..coeffs_needed {
                    coeffs.push((rest % t) as u128);
                    rest /= t;
                }
                (0..t).map(|a| a * t + field.eval(&coeffs, a as u128) as usize).collect()
            })
            .collect();
        (DesignKind::Polynomial { degree: coeffs_needed - 1 }, t * t, sets)
    };
    let mut design = WeakDesign { kind, d, t, m, sets, r: 1.0 };
    design.r = design.measure_r()?;
    if design.r > MAX_R {
        return Err(Error::InfeasibleDesign(format!("measured r = {} exceeds 2e", design.r)));
    }
    Ok(design)
}

impl WeakDesign {
    /// Checks every set and every overlap sum; returns the achieved `r`.
    pub fn measure_r(&self) -> Result<f64> {
        if self.sets.len() != self.m {
            return Err(Error::InfeasibleDesign(format!("{} sets for m = {}", self.sets.len(), self.m)));
        }
        let mut mark = vec![false; self.d];
        for (i, s) in self.sets.iter().enumerate() {
            if s.len() != self.t {
                return Err(Error::InfeasibleDesign(format!("|S_{i}| = {} ≠ {}", s.len(), self.t)));
            }
            for &x in s {
                if x >= self.d || mark[x] {
                    return Err(Error::InfeasibleDesign(format!("S_{i} has a bad or repeated index {x}")));
                }
                mark[x] = true;
            }
            for &x in s {
                mark[x] = false;
            }
        }
        let mut worst = 0.0f64;
        for i in 0..self.m {
            for &x in &self.sets[i] {
                mark[x] = true;
            }
            let sum: f64 = self.sets[..i]
                .iter()
                .map(|sj| 2f64.powi(sj.iter().filter(|&&x| mark[x]).count() as i32))
                .sum();
            worst = worst.max(sum);
            for &x in &self.sets[i] {
                mark[x] = false;
            }
        }
        Ok((worst / self.m as f64).max(1.0))
    }
}
