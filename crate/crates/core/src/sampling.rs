//! Platform-stable conversions from 64-bit random lanes to floats.
//!
//! Transcendentals go through `libm` so that the same lanes give the same
//! doubles on every target.

use rand::RngCore;

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Uniform in `[0, 1)` from the top 53 bits of a lane.
#[inline]
pub fn unit_closed_open(lane: u64) -> f64 {
    (lane >> 11) as f64 * TWO_POW_NEG_53
}

/// Uniform in `(0, 1]` from the top 53 bits of a lane.
#[inline]
pub fn unit_open_closed(lane: u64) -> f64 {
    ((lane >> 11) + 1) as f64 * TWO_POW_NEG_53
}

#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    unit_closed_open(rng.next_u64())
}

#[inline]
pub fn bernoulli<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> bool {
    uniform(rng) < p
}

/// Box–Muller on two lanes; returns two independent standard normals.
#[inline]
pub fn gaussian_pair<R: RngCore + ?Sized>(rng: &mut R) -> (f64, f64) {
    let u1 = unit_open_closed(rng.next_u64());
    let u2 = unit_closed_open(rng.next_u64());
    let r = libm::sqrt(-2.0 * libm::log(u1));
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * libm::cos(theta), r * libm::sin(theta))
}

/// Exponential(1), i.e. Gamma(1, 1).
#[inline]
pub fn exponential<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    -libm::log(unit_open_closed(rng.next_u64()))
}

/// Uniform integer in `[0, bound)` by rejection, `bound >= 1`.
pub fn below<R: RngCore + ?Sized>(rng: &mut R, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    if bound.is_power_of_two() {
        return rng.next_u64() & (bound - 1);
    }
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % bound;
        }
    }
}

/// Pairwise (cascade) summation; error grows with `log2(len)` rather than `len`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let ss: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&ss) / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prf::PrfRng;

    #[test]
    fn unit_ranges() {
        assert_eq!(unit_closed_open(0), 0.0);
        assert!(unit_closed_open(u64::MAX) < 1.0);
        assert!(unit_open_closed(0) > 0.0);
        assert_eq!(unit_open_closed(u64::MAX), 1.0);
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = PrfRng::from_u64(1, "gauss");
        let mut xs = Vec::new();
        for _ in 0..50_000 {
            let (a, b) = gaussian_pair(&mut rng);
            xs.push(a);
            xs.push(b);
        }
        let (m, se) = mean_and_se(&xs);
        assert!(m.abs() < 4.0 * se);
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn pairwise_matches_naive_on_small() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&xs), xs.iter().sum::<f64>());
    }

    #[test]
    fn below_in_range() {
        let mut rng = PrfRng::from_u64(2, "below");
        for b in [1u64, 3, 7, 10, 1 << 20] {
            for _ in 0..100 {
                assert!(below(&mut rng, b) < b);
            }
        }
    }
}
