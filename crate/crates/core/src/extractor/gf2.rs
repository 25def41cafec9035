//! Arithmetic in GF(2^w) for 1 ≤ w ≤ 128, elements packed into `u128`.

use crate::error::{invalid, Result};

/// Low-order terms of x^64 + x^4 + x^3 + x + 1 and x^128 + x^7 + x^2 + x + 1.
const WIDE_MODULI: [(u32, u128); 2] = [(64, 0x1b), (128, 0x87)];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gf2w {
    width: u32,
    /// The modulus without its leading `x^width` term.
    low: u128,
}

impl Gf2w {
    pub fn new(width: u32) -> Result<Self> {
        let low = match width {
            1..=32 => smallest_irreducible(width),
            _ => WIDE_MODULI
                .iter()
                .find(|(w, _)| *w == width)
                .map(|(_, low)| *low)
                .ok_or_else(|| invalid(format!("no modulus for GF(2^{width})")))?,
        };
        Ok(Self { width, low })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn modulus_low(&self) -> u128 {
        self.low
    }

    pub fn mask(&self) -> u128 {
        if self.width == 128 {
            u128::MAX
        } else {
            (1u128 << self.width) - 1
        }
    }

    #[inline]
    fn xtime(&self, a: u128) -> u128 {
        let carry = (a >> (self.width - 1)) & 1 == 1;
        let shifted = (a << 1) & self.mask();
        if carry {
            shifted ^ self.low
        } else {
            shifted
        }
    }

    pub fn mul(&self, mut a: u128, mut b: u128) -> u128 {
        let mut acc = 0u128;
        while b != 0 {
            if b & 1 == 1 {
                acc ^= a;
            }
            b >>= 1;
            a = self.xtime(a);
        }
        acc
    }

    /// `Σ coeffs[j] · x^j` by Horner's rule.
    pub fn eval(&self, coeffs: &[u128], x: u128) -> u128 {
        coeffs.iter().rev().fold(0, |acc, &c| self.mul(acc, x) ^ c)
    }
}

/// Polynomials over GF(2) of degree ≤ 63 as bit masks.
fn poly_mod(mut a: u64, m: u64) -> u64 {
    let dm = 63 - m.leading_zeros();
    while a != 0 && 63 - a.leading_zeros() >= dm {
        a ^= m << (63 - a.leading_zeros() - dm);
    }
    a
}

fn poly_mulmod(a: u64, b: u64, m: u64) -> u64 {
    let dm = 63 - m.leading_zeros();
    let mut acc = 0u64;
    let mut a = poly_mod(a, m);
    let mut b = b;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if (a >> dm) & 1 == 1 {
            a ^= m;
        }
    }
    acc
}

fn poly_gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = poly_mod(a, b);
        a = b;
        b = r;
    }
    a
}

fn prime_factors(mut n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Rabin's test: `f` of degree `w` is irreducible iff `x^(2^w) ≡ x (mod f)` and
/// `gcd(x^(2^(w/q)) − x, f) = 1` for every prime `q | w`.
pub fn is_irreducible(f: u64) -> bool {
    if f < 2 {
        return false;
    }
    let w = 63 - f.leading_zeros();
    if w == 0 {
        return false;
    }
    let frob = |k: u32| (0..k).fold(poly_mod(2, f), |v, _| poly_mulmod(v, v, f));
    if frob(w) != poly_mod(2, f) {
        return false;
    }
    prime_factors(w).into_iter().all(|q| poly_gcd(f, frob(w / q) ^ poly_mod(2, f)) == 1)
}

/// Low terms of the numerically smallest irreducible polynomial of degree `w ≤ 32`.
fn smallest_irreducible(w: u32) -> u128 {
    let top = 1u64 << w;
    (0..top)
        .map(|low| top | low)
        .find(|&f| is_irreducible(f))
        .map(|f| u128::from(f ^ top))
        .expect("irreducible polynomials exist in every degree")
}
