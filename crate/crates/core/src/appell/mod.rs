//! The pseudoconformal (Appell) transformation and the one-parameter family of
//! scalar functions obtained from it under the normalisation `alpha * beta = 1`.
//!
//! With `gamma = alpha / beta > 1` the time change `s(t)` squeezes `[0, 1]`
//! towards `s = 0`, so a short window of the original evolution is stretched
//! over unit time.

mod bounds;
mod closure;
mod transform;

pub use bounds::{check_scalar_bounds, evaluate_bounds_at, BoundCheck, BoundReport, BoundSample, IDENTITY_TOLERANCE};
pub use closure::{
    closure_residual, closure_study, standard_triples, ClosureLevel, ClosureSetup, ClosureStudy, ManufacturedTriple,
};
pub use transform::{
    appell_transform, transform_forcing, transform_potential, AppellParams, Direction, TimeSamples,
};

use crate::error::{Error, Result};

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("gamma must be positive and finite, got {gamma}")));
    }
    Ok(())
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

/// `1 / (sqrt(gamma) (1 - t) + t / sqrt(gamma))`
pub fn alpha_of_t(gamma: f64, t: f64) -> Result<f64> {
    check_gamma(gamma)?;
    check_unit("t", t)?;
    Ok(ScalarFns { gamma }.alpha(t))
}

/// `t / (gamma (1 - t) + t)`
pub fn s_of_t(gamma: f64, t: f64) -> Result<f64> {
    check_gamma(gamma)?;
    check_unit("t", t)?;
    Ok(ScalarFns { gamma }.s(t))
}

/// `s gamma / (1 + s (gamma - 1))`, the inverse of [`s_of_t`].
pub fn t_of_s(gamma: f64, s: f64) -> Result<f64> {
    check_gamma(gamma)?;
    check_unit("s", s)?;
    Ok(ScalarFns { gamma }.t(s))
}

/// `1 / (1 - t + t / gamma) - 1 / (gamma (1 - t) + t)`
pub fn beta_of_t(gamma: f64, t: f64) -> Result<f64> {
    check_gamma(gamma)?;
    check_unit("t", t)?;
    Ok(ScalarFns { gamma }.beta(t))
}

/// Unchecked evaluation of the scalar family for a fixed `gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarFns {
    gamma: f64,
}

impl ScalarFns {
    pub fn new(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(ScalarFns { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self, t: f64) -> f64 {
        let r = self.gamma.sqrt();
        1.0 / (r * (1.0 - t) + t / r)
    }

    pub fn s(&self, t: f64) -> f64 {
        t / (self.gamma * (1.0 - t) + t)
    }

    pub fn t(&self, s: f64) -> f64 {
        s * self.gamma / (1.0 + s * (self.gamma - 1.0))
    }

    pub fn beta(&self, t: f64) -> f64 {
        1.0 / (1.0 - t + t / self.gamma) - 1.0 / (self.gamma * (1.0 - t) + t)
    }

    /// Jacobian `dt/ds = gamma / (1 + s (gamma - 1))^2`.
    pub fn dt_ds(&self, s: f64) -> f64 {
        let d = 1.0 + s * (self.gamma - 1.0);
        self.gamma / (d * d)
    }

    /// Image of `t in [3/8, 5/8]` under `s(t)`.
    pub fn interval_1(&self) -> (f64, f64) {
        let g = self.gamma;
        (3.0 / (5.0 * g + 3.0), 5.0 / (3.0 * g + 5.0))
    }

    /// Image of `t in [1/4, 3/4]` under `s(t)`.
    pub fn interval_2(&self) -> (f64, f64) {
        let g = self.gamma;
        (1.0 / (3.0 * g + 1.0), 3.0 / (g + 3.0))
    }
}
