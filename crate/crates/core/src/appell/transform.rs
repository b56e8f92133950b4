use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, Trajectory};
use crate::interp::{interpolate_slice, resample_dilated};
use crate::propagator::{ForcingSpec, PotentialSpec, SpaceTimeFn, SpaceTimeSpec};
use crate::C64;

/// Positive parameters of the transformation. `gamma = alpha / beta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AppellParams {
    alpha: f64,
    beta: f64,
}

impl AppellParams {
    /// `alpha = sqrt(gamma)`, `beta = 1 / sqrt(gamma)`.
    pub fn normalized(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
        }
        Ok(AppellParams { alpha: gamma.sqrt(), beta: 1.0 / gamma.sqrt() })
    }

    pub fn general(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::Domain(format!("alpha and beta must be positive, got {alpha}, {beta}")));
        }
        Ok(AppellParams { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.alpha / self.beta
    }

    /// Parameters of the inverse map.
    pub fn inverse(&self) -> Self {
        AppellParams { alpha: self.beta, beta: self.alpha }
    }

    /// `alpha (1 - t) + beta t`
    pub fn denom(&self, t: f64) -> f64 {
        self.alpha * (1.0 - t) + self.beta * t
    }

    /// Source time `beta t / (alpha (1 - t) + beta t)`.
    pub fn time_map(&self, t: f64) -> f64 {
        self.beta * t / self.denom(t)
    }

    /// Spatial dilation `sqrt(alpha beta) / (alpha (1 - t) + beta t)`.
    pub fn dilation(&self, t: f64) -> f64 {
        (self.alpha * self.beta).sqrt() / self.denom(t)
    }

    /// Coefficient `c` of the chirp `exp(-i c |x|^2)`.
    pub fn chirp(&self, t: f64) -> f64 {
        (self.alpha - self.beta) / (4.0 * self.denom(t))
    }

    fn oriented(&self, direction: Direction) -> Self {
        match direction {
            Direction::Forward => *self,
            Direction::Inverse => self.inverse(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Uniform output times `t0, t0 + dt, ...` (`count` of them).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeSamples {
    pub t0: f64,
    pub dt: f64,
    pub count: usize,
}

impl TimeSamples {
    pub fn new(t0: f64, dt: f64, count: usize) -> Self {
        TimeSamples { t0, dt, count }
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.time(k)).collect()
    }
}

fn chirp_phase(c: f64, x: &[f64]) -> C64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    C64::from_polar(1.0, -c * r2)
}

/// Transforms a stored solution onto `target` at the requested times.
///
/// The source is interpolated cubically in time at `s(t)` and band-limitedly
/// in space at the dilated points. Fails when a dilated point leaves the
/// source box or `s(t)` leaves the stored time range.
pub fn appell_transform(
    traj: &Trajectory,
    params: &AppellParams,
    direction: Direction,
    target: &Arc<Grid>,
    times: TimeSamples,
) -> Result<Trajectory> {
    let p = params.oriented(direction);
    let src = traj.grid();
    if src.dim() != target.dim() {
        return Err(Error::Mismatch("source and target grids differ in dimension".into()));
    }
    if times.count == 0 || !(times.dt > 0.0) {
        return Err(Error::Domain("need at least one output time and a positive step".into()));
    }
    let n_half = target.dim() as f64 / 2.0;
    let dim = target.dim();
    let identical = src.as_ref() == target.as_ref();
    let mut slices = Vec::with_capacity(times.count);
    for k in 0..times.count {
        let t = times.time(k);
        if !(0.0..=1.0 + 1e-12).contains(&t) {
            return Err(Error::Domain(format!("output time {t} outside [0, 1]")));
        }
        let s = p.time_map(t);
        let source = interpolate_slice(traj, s)?;
        let c = p.dilation(t);
        let mut vals = if identical && c == 1.0 { source } else { resample_dilated(src, &source, c, target)? };
        let pref = c.powf(n_half);
        let chirp = p.chirp(t);
        for (i, v) in vals.iter_mut().enumerate() {
            *v *= pref * chirp_phase(chirp, &target.point(i)[..dim]);
        }
        slices.push(vals);
    }
    Trajectory::new(target.clone(), times.t0, times.dt, slices)
}

/// `V~(x, t) = c(t)^2 V(c(t) x, s(t))` with `c` the dilation.
#[derive(Debug)]
struct TransformedPotential {
    inner: PotentialSpec,
    params: AppellParams,
    sup: f64,
}

impl SpaceTimeFn for TransformedPotential {
    fn kind(&self) -> &str {
        "appell_potential"
    }
    fn eval(&self, x: &[f64], t: f64) -> C64 {
        let c = self.params.dilation(t);
        let y: Vec<f64> = x.iter().map(|v| c * v).collect();
        self.inner.eval(&y, self.params.time_map(t)) * (c * c)
    }
    fn sup_bound(&self) -> f64 {
        self.sup
    }
    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }
}

/// `F~(x, t) = c(t)^(n/2 + 2) F(c(t) x, s(t)) exp(-i chirp(t) |x|^2)`.
#[derive(Debug)]
struct TransformedForcing {
    inner: ForcingSpec,
    params: AppellParams,
    dim: usize,
    sup: f64,
}

impl SpaceTimeFn for TransformedForcing {
    fn kind(&self) -> &str {
        "appell_forcing"
    }
    fn eval(&self, x: &[f64], t: f64) -> C64 {
        let c = self.params.dilation(t);
        let y: Vec<f64> = x.iter().map(|v| c * v).collect();
        let pref = c.powf(self.dim as f64 / 2.0 + 2.0);
        self.inner.eval(&y, self.params.time_map(t)) * pref * chirp_phase(self.params.chirp(t), x)
    }
    fn sup_bound(&self) -> f64 {
        self.sup
    }
    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }
}

/// Transformed potential, its bound recomputed on `grid x times`.
pub fn transform_potential(v: &PotentialSpec, params: &AppellParams, grid: &Grid, times: &[f64]) -> Result<PotentialSpec> {
    let probe = SpaceTimeSpec::new(TransformedPotential { inner: v.clone(), params: *params, sup: f64::INFINITY });
    let sup = probe.measured_sup(grid, times);
    if !sup.is_finite() {
        return Err(Error::NonFinite("transformed potential".into()));
    }
    Ok(SpaceTimeSpec::new(TransformedPotential { inner: v.clone(), params: *params, sup }))
}

/// Transformed forcing, its bound recomputed on `grid x times`.
pub fn transform_forcing(f: &ForcingSpec, params: &AppellParams, grid: &Grid, times: &[f64]) -> Result<ForcingSpec> {
    let dim = grid.dim();
    let probe = SpaceTimeSpec::new(TransformedForcing { inner: f.clone(), params: *params, dim, sup: f64::INFINITY });
    let sup = probe.measured_sup(grid, times);
    if !sup.is_finite() {
        return Err(Error::NonFinite("transformed forcing".into()));
    }
    Ok(SpaceTimeSpec::new(TransformedForcing { inner: f.clone(), params: *params, dim, sup }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::appell::ScalarFns;
    use crate::grid::make_grid;

    #[test]
    fn normalized_params_match_scalar_family() {
        let p = AppellParams::normalized(25.0).unwrap();
        let f = ScalarFns::new(25.0).unwrap();
        for t in [0.0, 0.2, 0.5, 0.9, 1.0] {
            assert!((p.dilation(t) - f.alpha(t)).abs() < 1e-14);
            assert!((p.time_map(t) - f.s(t)).abs() < 1e-15);
            // chirp exp(-i beta(t) |x|^2 / 4)
            assert!((4.0 * p.chirp(t) - f.beta(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_time_maps_compose_to_identity() {
        let p = AppellParams::general(1.7, 0.6).unwrap();
        let q = p.inverse();
        for t in [0.0, 0.1, 0.5, 0.83, 1.0] {
            let s = p.time_map(t);
            assert!((q.time_map(s) - t).abs() < 1e-15);
            assert!((p.dilation(t) * q.dilation(s) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_positive_parameters() {
        assert!(AppellParams::general(0.0, 1.0).is_err());
        assert!(AppellParams::general(1.0, -1.0).is_err());
        assert!(AppellParams::normalized(0.0).is_err());
    }

    #[test]
    fn zero_potential_and_forcing_stay_zero() {
        let g = make_grid(1, 4.0, 32).unwrap();
        let p = AppellParams::normalized(9.0).unwrap();
        let v = transform_potential(&SpaceTimeSpec::zero(), &p, &g, &[0.0, 0.5]).unwrap();
        assert!(v.is_zero() && v.sup_bound() == 0.0);
        let f = transform_forcing(&SpaceTimeSpec::zero(), &p, &g, &[0.0, 0.5]).unwrap();
        assert!(f.is_zero());
    }

    #[test]
    fn constant_potential_scales_by_alpha_squared() {
        let g = make_grid(1, 4.0, 32).unwrap();
        let gamma = 20.0;
        let p = AppellParams::normalized(gamma).unwrap();
        let f = ScalarFns::new(gamma).unwrap();
        let c = C64::new(0.3, -0.2);
        let v = transform_potential(&SpaceTimeSpec::constant(c), &p, &g, &[0.5]).unwrap();
        for t in [0.1, 0.4, 0.7] {
            for x in [-3.0, 0.0, 1.25] {
                let expect = c * f.alpha(t).powi(2);
                assert!((v.eval(&[x], t) - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn transformed_potential_bound_on_middle_window() {
        let g = make_grid(1, 6.0, 64).unwrap();
        let gamma = 50.0;
        let p = AppellParams::normalized(gamma).unwrap();
        let l = 2.0;
        let v = SpaceTimeSpec::gaussian_well(C64::new(0.0, l), 1.0, 3.0);
        let times: Vec<f64> = (0..=50).map(|k| 0.25 + 0.5 * k as f64 / 50.0).collect();
        let vt = transform_potential(&v, &p, &g, &times).unwrap();
        assert!(vt.sup_bound() <= 16.0 * l / gamma);
    }

    #[test]
    fn equal_parameters_give_identity_forcing() {
        let g = make_grid(1, 4.0, 32).unwrap();
        let p = AppellParams::general(1.3, 1.3).unwrap();
        let f = SpaceTimeSpec::gaussian_well(C64::new(1.0, 2.0), 1.5, 2.0);
        let ft = transform_forcing(&f, &p, &g, &[0.0, 0.3]).unwrap();
        for t in [0.0, 0.3, 0.8] {
            for x in [-2.0, 0.5] {
                assert!((ft.eval(&[x], t) - f.eval(&[x], t)).norm() < 1e-14);
            }
        }
    }
}
