//! One-time observability over moving annuli.
//!
//! For `0 < t < t*` and `R0 <= rho <= M` the quantity
//! `J(rho, t) = (1/t) int_{t/4}^{3t} int_{||y| - rho(1 + s/t)| < 4 rho sqrt(t)} |u|^2 + s |grad u|^2`
//! is bounded below by `e^{-c rho^2 / t} c0^2` for a dimensional constant `c`,
//! which is fitted here from data rather than assumed.

mod functional;
pub(crate) mod region;

pub use functional::{
    classify_series, decay_fit, lower_bound_check, observability_functional, observability_parts,
    uniqueness_probe, DecayFit, JParts, LimitClass, LowerBoundReport, ProbeMode, ProbeSeries, TAIL_RATIO,
};

use crate::error::{Error, Result};
use crate::grid::{Grid, Trajectory};
use crate::propagator::PotentialSpec;
use crate::sum::pairwise_by;
use region::{cell_weights, shell_measure, Shell};

/// Fewest stored slices required inside `[t/4, 3t]`.
pub const MIN_WINDOW_SLICES: usize = 16;
/// Fewest cells across the full band width `2 * band_factor * rho * sqrt(t)`.
pub const MIN_BAND_CELLS: f64 = 8.0;

/// Measured data of a scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConstants {
    /// Square root of the initial mass in `B_{R0}`.
    pub c0: f64,
    pub r0: f64,
    /// Radius of the ball carrying `A`; `None` is the whole box.
    pub m: Option<f64>,
    /// `sup_t (int_{B_M} |u|^2 + |grad u|^2)^{1/2}`
    pub a: f64,
    /// Bound on `|V|`.
    pub l: f64,
}

impl ScenarioConstants {
    pub fn new(c0: f64, r0: f64, m: Option<f64>, a: f64, l: f64) -> Result<Self> {
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(Error::Domain(format!("R0 must be positive, got {r0}")));
        }
        if let Some(m) = m {
            if !(m >= 4.0 * r0 + 1.0) {
                return Err(Error::Domain(format!("M = {m} violates the hypothesis M >= 4 R0 + 1 = {}", 4.0 * r0 + 1.0)));
            }
        }
        if !(c0 >= 0.0) || !c0.is_finite() || !(l >= 0.0) {
            return Err(Error::Domain(format!("need c0 >= 0 and L >= 0, got c0 = {c0}, L = {l}")));
        }
        if !(a >= c0 * (1.0 - 1e-12)) || !a.is_finite() {
            return Err(Error::Domain(format!("need A >= c0, got A = {a}, c0 = {c0}")));
        }
        Ok(ScenarioConstants { c0, r0, m, a, l })
    }

    /// Zero initial mass in `B_{R0}`: the lower bound is vacuous.
    pub fn is_degenerate(&self) -> bool {
        self.c0 == 0.0
    }
}

/// Measures `c0` on the first slice and `A` over all slices; `L` is the
/// potential's certified bound.
pub fn compute_constants(traj: &Trajectory, v: &PotentialSpec, r0: f64, m: Option<f64>) -> Result<ScenarioConstants> {
    ScenarioConstants::new(0.0, r0, m, 0.0, 0.0)?;
    let grid = traj.grid();
    let inner = cell_weights(grid, Shell::ball(r0))?;
    let outer = match m {
        Some(m) => cell_weights(grid, Shell::ball(m))?,
        None => vec![1.0; grid.len()],
    };
    let u0 = traj.field(0).values();
    let c0 = grid.integrate(|i| inner[i] * u0[i].norm_sqr()).sqrt();
    let mut a2 = 0.0_f64;
    for f in traj.fields() {
        let g = f.gradient_density();
        let u = f.values();
        a2 = a2.max(grid.integrate(|i| outer[i] * (u[i].norm_sqr() + g[i])));
    }
    let l = v.sup_bound();
    // B_{R0} inside B_M makes A >= c0 exact in quadrature as well
    ScenarioConstants::new(c0, r0, m, a2.sqrt().max(c0), l)
}

/// `min(256 A / (c0 L), 2^-14 (c0 / A)^4, R0^2, 1 / L^2)`; terms with `L = 0`
/// are infinite.
pub fn t_star(constants: &ScenarioConstants) -> Result<f64> {
    let ScenarioConstants { c0, r0, a, l, .. } = *constants;
    if !(c0 > 0.0) {
        return Err(Error::Degenerate(format!("t* needs c0 > 0, got {c0}")));
    }
    let (first, last) = if l > 0.0 { (256.0 * a / (c0 * l), 1.0 / (l * l)) } else { (f64::INFINITY, f64::INFINITY) };
    let second = (c0 / a).powi(4) / 16384.0;
    Ok(first.min(second).min(r0 * r0).min(last))
}

/// Point `(rho, t)` at which `J` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservabilityQuery {
    pub rho: f64,
    pub t: f64,
    /// Half-width coefficient: the band is `band_factor * rho * sqrt(t)`.
    pub band_factor: f64,
    /// Distance to the annulus center is measured on the torus.
    pub periodic: bool,
}

impl ObservabilityQuery {
    pub fn new(rho: f64, t: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() || !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("need rho > 0 and t > 0, got rho = {rho}, t = {t}")));
        }
        Ok(ObservabilityQuery { rho, t, band_factor: 4.0, periodic: false })
    }

    pub fn periodic(mut self) -> Self {
        self.periodic = true;
        self
    }

    pub fn with_band_factor(mut self, band_factor: f64) -> Result<Self> {
        if !(band_factor > 0.0) {
            return Err(Error::Domain(format!("band factor must be positive, got {band_factor}")));
        }
        self.band_factor = band_factor;
        Ok(self)
    }

    /// `[t/4, 3t]`
    pub fn time_window(&self) -> (f64, f64) {
        (0.25 * self.t, 3.0 * self.t)
    }

    pub fn half_width(&self) -> f64 {
        self.band_factor * self.rho * self.t.sqrt()
    }

    /// `rho (1 + s/t)`
    pub fn center(&self, s: f64) -> f64 {
        self.rho * (1.0 + s / self.t)
    }

    fn shell(&self, s: f64) -> Shell {
        Shell::band(self.center(s), self.half_width(), self.periodic)
    }

    /// Checks the band against the lattice: it must span enough cells and,
    /// unless periodic, stay inside the box for the whole window.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let cells = 2.0 * self.half_width() / grid.spacing();
        if cells < MIN_BAND_CELLS {
            return Err(Error::Resolution(format!(
                "band at rho = {}, t = {} spans {cells:.2} cells, need {MIN_BAND_CELLS}",
                self.rho, self.t
            )));
        }
        if self.periodic {
            if grid.dim() != 1 {
                return Err(Error::Domain("periodic observability is one-dimensional".into()));
            }
            return Ok(());
        }
        let outer = self.center(self.time_window().1) + self.half_width();
        if outer > grid.half_width() {
            return Err(Error::Domain(format!(
                "band exits the box: outer radius {outer:.4} > half width {}",
                grid.half_width()
            )));
        }
        Ok(())
    }
}

/// Lebesgue measure of the annulus at time `s`, within the box (on the torus
/// when periodic).
pub fn region_measure(query: &ObservabilityQuery, grid: &Grid, s: f64) -> Result<f64> {
    let (a, b) = query.time_window();
    if s < a * (1.0 - 1e-12) || s > b * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("s = {s} outside the window [{a}, {b}]")));
    }
    query.validate(grid)?;
    shell_measure(grid, query.shell(s))
}

/// Per-cell weights of the region at time `s`, times the cell volume.
pub(crate) fn region_weights(query: &ObservabilityQuery, grid: &Grid, s: f64) -> Result<Vec<f64>> {
    let vol = grid.cell_volume();
    Ok(cell_weights(grid, query.shell(s))?.into_iter().map(|w| w * vol).collect())
}

pub(crate) fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    pairwise_by(weights.len(), |i| if weights[i] == 0.0 { 0.0 } else { weights[i] * values[i] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::C64;

    #[test]
    fn t_star_examples() {
        let k = ScenarioConstants::new(1.0, 1.0, None, 1.0, 1.0).unwrap();
        assert!((t_star(&k).unwrap() - 2f64.powi(-14)).abs() < 1e-18);
        let k = ScenarioConstants::new(1.0, 1.0, None, 1.0, 0.0).unwrap();
        assert_eq!(t_star(&k).unwrap(), 2f64.powi(-14));
        let k = ScenarioConstants::new(1.0, 0.5, None, 10.0, 2.0).unwrap();
        let expect = 2f64.powi(-14) * 1e-4;
        assert!((t_star(&k).unwrap() - expect).abs() < 1e-12 * expect);
        assert!((expect - 6.1035e-9).abs() < 1e-12);
    }

    #[test]
    fn t_star_needs_mass() {
        let k = ScenarioConstants::new(0.0, 1.0, None, 0.0, 1.0).unwrap();
        assert!(k.is_degenerate());
        assert!(t_star(&k).is_err());
    }

    #[test]
    fn m_hypothesis_enforced() {
        assert!(ScenarioConstants::new(1.0, 1.0, Some(4.9), 1.0, 0.0).is_err());
        assert!(ScenarioConstants::new(1.0, 1.0, Some(5.0), 1.0, 0.0).is_ok());
        assert!(ScenarioConstants::new(1.0, 1.0, None, 0.5, 0.0).is_err());
    }

    #[test]
    fn measure_examples() {
        let g1 = make_grid(1, 8.0, 512).unwrap();
        let q = ObservabilityQuery::new(1.0, 0.01).unwrap();
        assert!((region_measure(&q, &g1, 0.01).unwrap() - 1.6).abs() < 1e-12);
        assert!((region_measure(&q, &g1, 0.0025).unwrap() - 1.6).abs() < 1e-12);
        assert!(region_measure(&q, &g1, 0.001).is_err());
        let g2 = make_grid(2, 8.0, 256).unwrap();
        let area = region_measure(&q, &g2, 0.01).unwrap();
        assert!((area - std::f64::consts::PI * (2.4f64.powi(2) - 1.6f64.powi(2))).abs() < 1e-12);
        assert!((area - 10.053).abs() < 1e-3);
    }

    #[test]
    fn band_must_fit_and_resolve() {
        let g = make_grid(1, 4.0, 512).unwrap();
        // outer radius 4 + 0.4 exceeds the box
        assert!(matches!(ObservabilityQuery::new(1.0, 0.01).unwrap().validate(&g), Err(Error::Domain(_))));
        let coarse = make_grid(1, 8.0, 64).unwrap();
        assert!(matches!(ObservabilityQuery::new(1.0, 0.01).unwrap().validate(&coarse), Err(Error::Resolution(_))));
    }

    #[test]
    fn gaussian_constants() {
        // u0 = exp(-x^2 / 4): c0^2 = int_{-4}^{4} exp(-x^2 / 2)
        let g = make_grid(1, 20.0, 2048).unwrap();
        let u0: Vec<C64> = (0..g.len()).map(|i| C64::new((-g.coord(i).powi(2) / 4.0).exp(), 0.0)).collect();
        let traj = Trajectory::new(g, 0.0, 0.1, vec![u0]).unwrap();
        let k = compute_constants(&traj, &PotentialSpec::zero(), 4.0, Some(17.0)).unwrap();
        let c2 = k.c0 * k.c0;
        // cell fractions at the ball edge are second-order accurate
        assert!((c2 - 2.506_469_498_570_457).abs() < 1e-6, "{c2}");
        assert!((c2 - 2.5059).abs() < 1e-3);
        // A^2 = int exp(-x^2/2) (1 + x^2/4) = sqrt(2 pi) * 5/4
        assert!((k.a * k.a - (2.0 * std::f64::consts::PI).sqrt() * 1.25).abs() < 1e-8);
        assert!(k.a >= k.c0);
        assert_eq!(k.l, 0.0);
    }

    #[test]
    fn zero_trajectory_is_flagged() {
        let g = make_grid(1, 20.0, 256).unwrap();
        let traj = Trajectory::new(g.clone(), 0.0, 0.1, vec![vec![C64::new(0.0, 0.0); 256]; 3]).unwrap();
        let k = compute_constants(&traj, &PotentialSpec::zero(), 4.0, None).unwrap();
        assert!(k.is_degenerate() && k.a == 0.0);
        assert!(compute_constants(&traj, &PotentialSpec::zero(), 4.0, Some(10.0)).is_err());
    }
}
