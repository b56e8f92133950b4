//! Dense-sample verification of the quantitative bounds satisfied by the
//! scalar family for `gamma > 16`.

use super::ScalarFns;
use crate::error::{Error, Result};

/// Relative tolerance for `sqrt(gamma) alpha(t(s)) = 1 + s gamma - s`.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
/// Slack granted to the inequalities for rounding.
const ROUNDING: f64 = 1e-12;

/// One two-sided inequality `lo <= value <= hi` evaluated at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundSample {
    pub name: &'static str,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl BoundSample {
    /// Signed distance to the nearer end, relative to the bound's scale;
    /// negative when violated.
    pub fn margin(&self) -> f64 {
        let scale = self.hi.abs().max(self.lo.abs()).max(f64::MIN_POSITIVE);
        (self.value - self.lo).min(self.hi - self.value) / scale
    }

    pub fn holds(&self) -> bool {
        self.margin() >= -ROUNDING
    }
}

/// Evaluates every inequality of the family at the relative position
/// `u in [0, 1]` inside each of the intervals involved.
pub fn evaluate_bounds_at(gamma: f64, u: f64) -> Result<Vec<BoundSample>> {
    if !(gamma > 16.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("bounds require gamma > 16, got {gamma}")));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("relative position must lie in [0, 1], got {u}")));
    }
    let f = ScalarFns { gamma };
    let r = gamma.sqrt();
    let t1 = 0.375 + 0.25 * u;
    let t2 = 0.25 + 0.5 * u;
    let (a1, b1) = f.interval_1();
    let (a2, b2) = f.interval_2();
    let s1 = a1 + (b1 - a1) * u;
    let s2 = a2 + (b2 - a2) * u;

    // t(s) carried together with 1 - t(s) so that alpha keeps full relative
    // precision when t is close to 1
    let d = 1.0 + u * (gamma - 1.0);
    let t_s = u * gamma / d;
    let one_minus = (1.0 - u) / d;
    let alpha_ts = 1.0 / (r * one_minus + t_s / r);

    Ok(vec![
        BoundSample { name: "alpha_on_inner_window", value: f.alpha(t1), lo: 1.0 / r, hi: 3.0 / r },
        BoundSample { name: "alpha_on_outer_window", value: f.alpha(t2), lo: 1.0 / r, hi: 4.0 / r },
        BoundSample { name: "beta_on_outer_window", value: f.beta(t2), lo: 0.0, hi: 4.0 },
        BoundSample { name: "inner_interval_length", value: b1 - a1, lo: 0.25 / gamma, hi: 2.0 / gamma },
        BoundSample { name: "outer_interval_length", value: b2 - a2, lo: 0.5 / gamma, hi: 3.0 / gamma },
        BoundSample { name: "jacobian_on_inner_interval", value: f.dt_ds(s1), lo: gamma / 8.0, hi: gamma },
        BoundSample { name: "jacobian_on_outer_interval", value: f.dt_ds(s2), lo: gamma / 16.0, hi: gamma },
        BoundSample {
            name: "alpha_s_identity",
            value: (r * alpha_ts - d) / d,
            lo: -IDENTITY_TOLERANCE,
            hi: IDENTITY_TOLERANCE,
        },
    ])
}

/// Worst case of one inequality over all samples.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub name: &'static str,
    pub worst_margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub gamma: f64,
    pub samples: usize,
    pub checks: Vec<BoundCheck>,
}

impl BoundReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Checks every bound on `samples` equispaced points of each interval.
pub fn check_scalar_bounds(gamma: f64, samples: usize) -> Result<BoundReport> {
    if !(gamma > 16.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("bounds require gamma > 16, got {gamma}")));
    }
    if samples < 100 {
        return Err(Error::Domain(format!("at least 100 samples required, got {samples}")));
    }
    let mut checks: Vec<BoundCheck> = Vec::new();
    for j in 0..samples {
        let u = j as f64 / (samples - 1) as f64;
        for (k, b) in evaluate_bounds_at(gamma, u)?.into_iter().enumerate() {
            let m = b.margin();
            match checks.get_mut(k) {
                Some(c) => {
                    c.worst_margin = c.worst_margin.min(m);
                    c.pass &= b.holds();
                }
                None => checks.push(BoundCheck { name: b.name, worst_margin: m, pass: b.holds() }),
            }
        }
    }
    Ok(BoundReport { gamma, samples, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_hold_near_threshold_and_far() {
        for g in [16.0001, 17.0, 1e3, 1e6, 1e8] {
            let r = check_scalar_bounds(g, 1000).unwrap();
            assert!(r.all_pass(), "{g}: {:?}", r.checks);
            assert_eq!(r.checks.len(), 8);
        }
    }

    #[test]
    fn small_gamma_rejected() {
        assert!(check_scalar_bounds(8.0, 1000).is_err());
        assert!(check_scalar_bounds(16.0, 1000).is_err());
        assert!(check_scalar_bounds(20.0, 10).is_err());
    }

    #[test]
    fn margin_detects_violation() {
        let b = BoundSample { name: "x", value: 5.0, lo: 0.0, hi: 4.0 };
        assert!(!b.holds());
        assert!(b.margin() < 0.0);
    }
}
