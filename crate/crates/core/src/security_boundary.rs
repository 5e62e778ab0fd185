//! Exact combinatorics behind the tolerated number of watermark errors.
//!
//! An attacker who may corrupt up to `err` bits of a stolen watermark wins by
//! finding a public key whose hash lands within `2*err` of the original. With
//! a random-looking hash each attempt succeeds with probability
//! `a / 2^n`, where `a = sum_{i <= 2*err} C(n, i)` is the Hamming ball volume.
//! The security boundary is the largest `err(n)` keeping that probability at
//! the target `P_A`; everything is computed with exact big integers.

use alloc::format;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest `n` accepted by the exact routines.
pub const MAX_EXACT_BITS: usize = 1 << 16;

/// `sum_{i=0}^{radius} C(n, i)`.
pub fn cumulative_ball_size(n: usize, radius: usize) -> Result<BigUint> {
    check_n(n)?;
    if radius > n {
        return Err(Error::OutOfRange(format!("radius {radius} exceeds n = {n}")));
    }
    let mut term = BigUint::one();
    let mut sum = BigUint::one();
    for i in 0..radius {
        term = term * (n - i) / (i + 1);
        sum += &term;
    }
    Ok(sum)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_EXACT_BITS {
        return Err(Error::OutOfRange(format!("n = {n} outside [1, {MAX_EXACT_BITS}]")));
    }
    Ok(())
}

/// Base-2 logarithm of a big integer; `-inf` for zero.
pub fn log2_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 64 {
        return libm::log2(x.to_u64().unwrap_or(u64::MAX) as f64);
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap_or(u64::MAX);
    libm::log2(top as f64) + shift as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageBound {
    pub n: usize,
    pub err: usize,
    pub k: u64,
    pub q: u64,
    /// `log2 P_A`, capped at 0.
    pub bound_log2: f64,
}

impl AdvantageBound {
    pub fn probability(&self) -> f64 {
        libm::exp2(self.bound_log2)
    }
}

/// Upper bound on the chance that `k` hash evaluations hit a `2*err`-ball
/// around any of `q` stolen watermarks: `k * q * a / 2^n`, capped at 1.
pub fn attacker_bound(n: usize, err: usize, k: u64, q: u64) -> Result<AdvantageBound> {
    check_n(n)?;
    if k == 0 || q == 0 {
        return Err(Error::OutOfRange("k and q must be at least 1".into()));
    }
    let radius = err.saturating_mul(2).min(n);
    let a = cumulative_ball_size(n, radius)?;
    let raw = libm::log2(k as f64) + libm::log2(q as f64) - n as f64 + log2_big(&a);
    Ok(AdvantageBound { n, err, k, q, bound_log2: raw.min(0.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryResult {
    pub n: usize,
    pub target_pa_log2: f64,
    /// Largest tolerated number of watermark errors.
    pub err_n: usize,
    /// `1 - err_n / n`.
    pub r_n: f64,
    /// Smallest radius `j` with `sum_{i<=j} C(n,i) >= P_A * 2^n`; `err_n = j / 2`.
    pub crossing_radius: usize,
    /// `log2(sum_{i<j} C(n,i) / 2^n)`, strictly below the target.
    pub bracket_low_log2: f64,
    /// `log2(sum_{i<=j} C(n,i) / 2^n)`, at or above the target.
    pub bracket_high_log2: f64,
}

/// Decides `sum >= 2^exponent` exactly, or with a certified dyadic interval
/// when `exponent` is fractional.
fn at_least_power_of_two(sum: &BigUint, exponent: f64) -> Result<bool> {
    let floor = libm::floor(exponent);
    if floor == exponent {
        return Ok(*sum >= BigUint::one() << (floor as u64));
    }
    // 2^frac = mantissa / 2^52 up to 1 ulp; widen by two units on each side.
    const SCALE: u32 = 52;
    let frac = exponent - floor;
    let mantissa = libm::round(libm::exp2(frac) * (1u64 << SCALE) as f64) as u64;
    let lhs = sum << SCALE;
    let hi = BigUint::from(mantissa + 2) << (floor as u64);
    let lo = BigUint::from(mantissa - 2) << (floor as u64);
    if lhs >= hi {
        Ok(true)
    } else if lhs < lo {
        Ok(false)
    } else {
        Err(Error::Infeasible(format!(
            "cannot certify the comparison at 2^{exponent}; use an integer target"
        )))
    }
}

/// Solves for the security boundary `err(n)` at attacker probability
/// `2^target_pa_log2`.
///
/// Walks the cumulative binomial sums to the first radius `j` whose ball
/// volume reaches `P_A * 2^n` and returns `err(n) = floor(j / 2)`: when `j` is
/// even this is exactly the bracket `S(2e-1) < P_A 2^n <= S(2e)`, when it is
/// odd the bracket lies between `S(2e)` and `S(2e+1)`.
pub fn solve_boundary(n: usize, target_pa_log2: f64) -> Result<BoundaryResult> {
    check_n(n)?;
    if !target_pa_log2.is_finite() || target_pa_log2 > 0.0 || target_pa_log2 <= -(n as f64) {
        return Err(Error::Infeasible(format!(
            "target 2^{target_pa_log2} is outside (2^-{n}, 1]"
        )));
    }
    let exponent = n as f64 + target_pa_log2;
    let mut term = BigUint::one();
    let mut prev = BigUint::zero();
    let mut sum = BigUint::one();
    let mut j = 0usize;
    while !at_least_power_of_two(&sum, exponent)? {
        term = term * (n - j) / (j + 1);
        j += 1;
        prev = sum.clone();
        sum += &term;
    }
    let err_n = j / 2;
    Ok(BoundaryResult {
        n,
        target_pa_log2,
        err_n,
        r_n: 1.0 - err_n as f64 / n as f64,
        crossing_radius: j,
        bracket_low_log2: log2_big(&prev) - n as f64,
        bracket_high_log2: log2_big(&sum) - n as f64,
    })
}

/// `(n, 1 - log2(a)/n)` with `a` the ball volume at radius `2*floor(f*n)`.
pub fn convergence_curve(err_fraction: f64, n_values: &[usize]) -> Result<Vec<(usize, f64)>> {
    if !(0.0..0.5).contains(&err_fraction) {
        return Err(Error::OutOfRange(format!("error fraction {err_fraction} outside [0, 0.5)")));
    }
    n_values
        .iter()
        .map(|&n| {
            let err = libm::floor(err_fraction * n as f64) as usize;
            let a = cumulative_ball_size(n, (2 * err).min(n))?;
            Ok((n, 1.0 - log2_big(&a) / n as f64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_ball_sizes() {
        assert_eq!(cumulative_ball_size(8, 2).unwrap(), BigUint::from(37u32));
        assert_eq!(cumulative_ball_size(16, 2).unwrap(), BigUint::from(137u32));
        assert_eq!(cumulative_ball_size(8, 0).unwrap(), BigUint::one());
        assert!(cumulative_ball_size(8, 9).is_err());
        assert!(cumulative_ball_size(MAX_EXACT_BITS + 1, 0).is_err());
    }

    #[test]
    fn full_ball_is_power_of_two() {
        for n in [1, 7, 64, 1000] {
            assert_eq!(cumulative_ball_size(n, n).unwrap(), BigUint::one() << n);
        }
    }

    #[test]
    fn ball_matches_enumeration_up_to_20_bits() {
        for n in 1..=20usize {
            let mut counts = alloc::vec![0u64; n + 1];
            for x in 0u32..(1u32 << n) {
                counts[x.count_ones() as usize] += 1;
            }
            let mut acc = 0u64;
            for (r, c) in counts.iter().enumerate() {
                acc += c;
                assert_eq!(cumulative_ball_size(n, r).unwrap(), BigUint::from(acc), "n={n} r={r}");
            }
        }
    }

    #[test]
    fn large_ball_below_entropy_bound() {
        let a = cumulative_ball_size(2048, 733).unwrap();
        let l = log2_big(&a);
        // exact value, frozen from an independent big-integer sum
        assert!((l - 1922.439).abs() < 1e-3, "log2 = {l}");
        let p = 733.0 / 2048.0;
        let entropy = -(p * libm::log2(p) + (1.0 - p) * libm::log2(1.0 - p));
        assert!(l <= 2048.0 * entropy);
        assert!(2048.0 * entropy - l < 6.0);
    }

    #[test]
    fn bound_examples() {
        let b = attacker_bound(8, 1, 1, 1).unwrap();
        assert!((b.bound_log2 - libm::log2(37.0 / 256.0)).abs() < 1e-12);
        assert_eq!(attacker_bound(8, 4, 1, 1).unwrap().bound_log2, 0.0);
        assert_eq!(attacker_bound(8, 9, 1, 1).unwrap().bound_log2, 0.0);
        assert!(attacker_bound(8, 1, 0, 1).is_err());
        let b = attacker_bound(2048, 51, 1, 1).unwrap();
        assert!((b.bound_log2 / -2048.0 - 0.715).abs() < 0.01);
    }

    #[test]
    fn bound_is_monotone() {
        let base = attacker_bound(64, 3, 10, 10).unwrap().bound_log2;
        assert!(attacker_bound(64, 4, 10, 10).unwrap().bound_log2 >= base);
        assert!(attacker_bound(64, 3, 11, 10).unwrap().bound_log2 >= base);
        assert!(attacker_bound(64, 3, 10, 11).unwrap().bound_log2 >= base);
    }

    fn assert_exact_bracket(res: &BoundaryResult) {
        let j = res.crossing_radius;
        let below = if j == 0 { BigUint::zero() } else { cumulative_ball_size(res.n, j - 1).unwrap() };
        let at = cumulative_ball_size(res.n, j).unwrap();
        let t = BigUint::one() << (res.n as i64 + res.target_pa_log2 as i64) as u64;
        assert!(below < t && t <= at);
        assert_eq!(res.err_n, j / 2);
        assert!(res.bracket_low_log2 < res.target_pa_log2);
        assert!(res.target_pa_log2 <= res.bracket_high_log2);
    }

    #[test]
    fn reported_boundaries() {
        let r2048 = solve_boundary(2048, -128.0).unwrap();
        assert_eq!(r2048.crossing_radius, 731);
        assert_eq!(r2048.err_n, 365);
        assert!((r2048.r_n - 0.8217).abs() < 0.002);
        assert_exact_bracket(&r2048);

        let r1024 = solve_boundary(1024, -128.0).unwrap();
        assert_eq!(r1024.crossing_radius, 306);
        assert_eq!(r1024.err_n, 153);
        assert!((r1024.r_n - 0.8505).abs() < 0.002);
        assert_exact_bracket(&r1024);
    }

    #[test]
    fn probability_one_reaches_half() {
        let r = solve_boundary(8, 0.0).unwrap();
        assert_eq!((r.err_n, r.r_n), (4, 0.5));
        let r = solve_boundary(8, -1e-9).unwrap();
        assert_eq!((r.err_n, r.r_n), (4, 0.5));
    }

    #[test]
    fn infeasible_targets() {
        assert!(matches!(solve_boundary(64, -64.0), Err(Error::Infeasible(_))));
        assert!(matches!(solve_boundary(64, -100.0), Err(Error::Infeasible(_))));
        assert!(matches!(solve_boundary(64, 0.5), Err(Error::Infeasible(_))));
        assert!(matches!(solve_boundary(64, f64::NAN), Err(Error::Infeasible(_))));
    }

    #[test]
    fn fractional_target_agrees_with_neighbours() {
        let lo = solve_boundary(512, -64.0).unwrap();
        let mid = solve_boundary(512, -63.5).unwrap();
        let hi = solve_boundary(512, -63.0).unwrap();
        assert!(lo.crossing_radius <= mid.crossing_radius && mid.crossing_radius <= hi.crossing_radius);
        assert!(mid.bracket_low_log2 < -63.5 && -63.5 <= mid.bracket_high_log2);
    }

    #[test]
    fn boundary_is_monotone_in_n() {
        let mut last_err = 0;
        let mut rates = Vec::new();
        for n in (256..=4096).step_by(256) {
            let r = solve_boundary(n, -128.0).unwrap();
            assert!(r.err_n >= last_err);
            last_err = r.err_n;
            rates.push(r.r_n);
        }
        assert!(rates.windows(2).all(|w| w[1] <= w[0] + 1e-3));
    }

    #[test]
    fn convergence_constants() {
        let c = convergence_curve(0.025, &[4096]).unwrap();
        assert!((c[0].1 - 0.715).abs() < 0.01, "{c:?}");
        let c = convergence_curve(0.075, &[4096]).unwrap();
        assert!((c[0].1 - 0.39).abs() < 0.01, "{c:?}");
        let c = convergence_curve(1e-6, &[128]).unwrap();
        assert_eq!(c[0].1, 1.0);
        assert!(convergence_curve(0.5, &[128]).is_err());
    }
}
