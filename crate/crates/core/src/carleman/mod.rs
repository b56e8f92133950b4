//! Carleman weight machinery: smooth cutoffs, the localized auxiliary
//! function `g`, the conjugated operators `S` and `A` for the weight
//! `exp(sigma |x/R + phi(t) e_1|^2)`, and quadrature checks of the weighted
//! lower bound `sigma^{3/2} / (c R^2) ||e^{sigma w} g|| <= ||e^{sigma w} (i d_t + Lap) g||`.

mod cutoffs;
mod estimate;
mod field;
mod operators;

pub use cutoffs::{build_cutoffs, CutoffSet, Smoothstep, PHI_PLATEAU};
pub use estimate::{
    bump_member, build_g, calibrate_constant, carleman_check, standard_suite, BumpSpec, Calibration, CarlemanCheck,
    CarlemanProbe, CheckRecord, SuiteMember, SIGMA_MULTIPLIERS, smooth_bump, smooth_step,
};
pub use field::{SpaceTimeField, EDGE_MARGIN, TIME_MARGIN};
pub use operators::{
    apply_a, apply_s, commutator_check, commutator_formula, conjugate_operators, conjugation_residual, weight_exponent,
    CommutatorReport, CommutatorTerms, ConjugationReport, WeightCoefficient,
};

use crate::error::{Error, Result};

/// Weight parameters. `R` is taken from the cutoff set.
#[derive(Clone, Debug, PartialEq)]
pub struct CarlemanConfig {
    cutoffs: CutoffSet,
    sigma: f64,
    c_n: f64,
}

impl CarlemanConfig {
    pub fn new(cutoffs: CutoffSet, sigma: f64, c_n_candidate: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        if !(c_n_candidate > 0.0) || !c_n_candidate.is_finite() {
            return Err(Error::Domain(format!("c_n candidate must be positive, got {c_n_candidate}")));
        }
        Ok(CarlemanConfig { cutoffs, sigma, c_n: c_n_candidate })
    }

    pub fn r(&self) -> f64 {
        self.cutoffs.r()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn c_n_candidate(&self) -> f64 {
        self.c_n
    }

    pub fn cutoffs(&self) -> &CutoffSet {
        &self.cutoffs
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.cutoffs.clone(), sigma, self.c_n)
    }

    /// `sigma >= c_n R^2`
    pub fn admissible(&self) -> bool {
        self.sigma >= self.c_n * self.r() * self.r()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admissibility_flag() {
        let c = build_cutoffs(2.0, 4).unwrap();
        assert!(CarlemanConfig::new(c.clone(), 4.0, 1.0).unwrap().admissible());
        assert!(!CarlemanConfig::new(c.clone(), 3.9, 1.0).unwrap().admissible());
        assert!(CarlemanConfig::new(c, 0.0, 1.0).is_err());
    }
}
