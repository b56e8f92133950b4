//! Pairwise (cascade) summation.
//!
//! Every reduction that ends up in a reported number goes through here so that
//! results do not depend on the platform's choice of vectorised accumulation.

use crate::C64;

const BLOCK: usize = 32;

/// Pairwise sum of `f(i)` for `i` in `0..n`.
pub fn pairwise_by<F: Fn(usize) -> f64>(n: usize, f: F) -> f64 {
    fn rec<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= BLOCK {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, f) + rec(mid, hi, f)
        }
    }
    rec(0, n, &f)
}

/// Complex counterpart of [`pairwise_by`].
pub fn pairwise_by_c<F: Fn(usize) -> C64>(n: usize, f: F) -> C64 {
    C64::new(pairwise_by(n, |i| f(i).re), pairwise_by(n, |i| f(i).im))
}

pub fn pairwise(values: &[f64]) -> f64 {
    pairwise_by(values.len(), |i| values[i])
}

/// Largest value of `f(i)`, ignoring nothing: NaN propagates.
pub fn max_by<F: Fn(usize) -> f64>(n: usize, f: F) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for i in 0..n {
        let v = f(i);
        if v.is_nan() {
            return f64::NAN;
        }
        if v > m {
            m = v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_exact_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise(&v), 500_500.0);
    }

    #[test]
    fn pairwise_is_more_accurate_than_naive() {
        let n = 1_000_000;
        let s = pairwise_by(n, |_| 0.1);
        assert!((s - 100_000.0).abs() < 1e-8);
    }

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(pairwise(&[]), 0.0);
        assert_eq!(pairwise_by_c(0, |_| C64::new(1.0, 1.0)), C64::new(0.0, 0.0));
    }
}
