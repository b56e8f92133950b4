//! Manufactured solutions and the refinement study of the transformed equation.
//!
//! A triple `(u, V, F)` is built from a chosen `u` and `V` by setting
//! `F = -i u_t - Lap u - V u`. The solver reproduces `u` from `u(0)` up to
//! `O(dt^2)`, the transform carries the result to the new variables, and the
//! residual against `(V~, F~)` must shrink at the same rate.

use std::sync::Arc;

use super::transform::{appell_transform, transform_forcing, transform_potential, AppellParams, Direction, TimeSamples};
use crate::error::{Error, Result};
use crate::grid::{make_grid, Grid, WaveField};
use crate::propagator::{equation_residual, solve, ForcingSpec, PotentialSpec, SpaceTimeFn, SpaceTimeSpec};
use crate::C64;

/// `u(x, t) = (1 + eps e^{i nu t}) exp(-|x - c|^2 / (4 w^2) + i p . x)`.
#[derive(Clone, Debug)]
pub struct ManufacturedTriple {
    pub center: [f64; 2],
    pub width: f64,
    pub momentum: [f64; 2],
    pub eps: f64,
    pub nu: f64,
    pub potential: PotentialSpec,
}

impl ManufacturedTriple {
    fn amplitude(&self, t: f64) -> (C64, C64) {
        let e = C64::from_polar(self.eps, self.nu * t);
        (C64::new(1.0, 0.0) + e, e * C64::new(0.0, self.nu))
    }

    /// The profile and `Lap` of the profile at `x`.
    fn profile(&self, x: &[f64]) -> (C64, C64) {
        let w2 = self.width * self.width;
        let mut r2 = 0.0;
        let mut phase = 0.0;
        let mut lap_factor = C64::new(-(x.len() as f64) / (2.0 * w2), 0.0);
        for (j, xj) in x.iter().enumerate() {
            let y = xj - self.center[j];
            r2 += y * y;
            phase += self.momentum[j] * xj;
            let d = C64::new(-y / (2.0 * w2), self.momentum[j]);
            lap_factor += d * d;
        }
        let g = C64::from_polar((-r2 / (4.0 * w2)).exp(), phase);
        (g, lap_factor * g)
    }

    pub fn solution(&self, x: &[f64], t: f64) -> C64 {
        self.amplitude(t).0 * self.profile(x).0
    }

    pub fn initial(&self, grid: &Arc<Grid>) -> Result<WaveField> {
        WaveField::from_fn(grid.clone(), 0.0, |x| self.solution(x, 0.0))
    }

    pub fn forcing(&self) -> ForcingSpec {
        SpaceTimeSpec::new(self.clone())
    }
}

impl SpaceTimeFn for ManufacturedTriple {
    fn kind(&self) -> &str {
        "manufactured_forcing"
    }

    fn eval(&self, x: &[f64], t: f64) -> C64 {
        let (a, da) = self.amplitude(t);
        let (g, lap) = self.profile(x);
        C64::new(0.0, -1.0) * da * g - a * lap - self.potential.eval(x, t) * a * g
    }

    fn sup_bound(&self) -> f64 {
        // |Lap g| <= 2 / (e w^2) + 2 |p|^2 + n / (2 w^2) with n <= 2
        let w2 = self.width * self.width;
        let p2 = self.momentum[0].powi(2) + self.momentum[1].powi(2);
        let lap = 2.0 / (std::f64::consts::E * w2) + 2.0 * p2 + 1.0 / w2;
        let a = 1.0 + self.eps.abs();
        (self.eps * self.nu).abs() + a * lap + a * self.potential.sup_bound()
    }
}

/// Five smooth triples with differing position, momentum, width and potential.
pub fn standard_triples() -> Vec<ManufacturedTriple> {
    let well = |re: f64, im: f64, width: f64, freq: f64, c: f64| {
        SpaceTimeSpec::gaussian_well_at(C64::new(re, im), width, freq, [c, 0.0])
    };
    vec![
        ManufacturedTriple {
            center: [0.0; 2],
            width: 1.0,
            momentum: [0.0; 2],
            eps: 0.0,
            nu: 0.0,
            potential: PotentialSpec::zero(),
        },
        ManufacturedTriple {
            center: [0.5, 0.0],
            width: 1.0,
            momentum: [1.0, 0.0],
            eps: 0.3,
            nu: 2.0,
            potential: well(1.0, 0.0, 2.0, 1.0, 0.0),
        },
        ManufacturedTriple {
            center: [-1.0, 0.0],
            width: 0.8,
            momentum: [-0.5, 0.0],
            eps: 0.2,
            nu: -3.0,
            potential: well(0.5, -0.4, 1.5, 0.0, 1.0),
        },
        ManufacturedTriple {
            center: [0.0; 2],
            width: 1.2,
            momentum: [0.8, 0.0],
            eps: 0.5,
            nu: 1.0,
            potential: PotentialSpec::constant(C64::new(0.3, 0.2)),
        },
        ManufacturedTriple {
            center: [1.5, 0.0],
            width: 1.0,
            momentum: [0.0; 2],
            eps: 0.1,
            nu: 5.0,
            potential: SpaceTimeSpec::sum(vec![well(-1.0, 0.3, 1.0, 2.0, -1.0), well(0.7, 0.0, 2.5, 0.0, 2.0)]),
        },
    ]
}

/// Discretisation of one level of the study; level `k` has `points * 2^k`
/// points per axis on both grids and step `dt / 2^k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosureSetup {
    pub gamma: f64,
    pub source_half_width: f64,
    pub target_half_width: f64,
    pub points: usize,
    pub dt: f64,
    /// Output window in the new time variable.
    pub window: (f64, f64),
}

impl Default for ClosureSetup {
    fn default() -> Self {
        ClosureSetup { gamma: 4.0, source_half_width: 32.0, target_half_width: 20.0, points: 256, dt: 0.01, window: (0.1, 0.9) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosureLevel {
    pub points: usize,
    pub dt: f64,
    /// Space-time `L^2` residual of the transformed trajectory.
    pub residual: f64,
    pub relative: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosureStudy {
    pub levels: Vec<ClosureLevel>,
    /// `log2` of successive residual ratios.
    pub orders: Vec<f64>,
}

impl ClosureStudy {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Residual of the transformed solution at one resolution.
pub fn closure_residual(triple: &ManufacturedTriple, setup: &ClosureSetup, level: u32) -> Result<ClosureLevel> {
    let scale = 1usize << level;
    let points = setup.points * scale;
    let dt = setup.dt / scale as f64;
    let params = AppellParams::normalized(setup.gamma)?;
    let (t0, t1) = setup.window;
    let count = ((t1 - t0) / dt).round() as usize + 1;
    if !(0.0..t1).contains(&t0) || t1 > 1.0 || count < 3 {
        return Err(Error::Domain(format!("output window [{t0}, {t1}] must lie in [0, 1] and hold three steps")));
    }
    let source = make_grid(1, setup.source_half_width, points)?;
    let target = make_grid(1, setup.target_half_width, points)?;

    // two spare steps keep the cubic stencil two-sided at the last output time
    let steps = (params.time_map(t1) / dt).ceil() + 2.0;
    let forcing = triple.forcing();
    let traj = solve(&triple.initial(&source)?, &triple.potential, &forcing, steps * dt, dt)?;
    let samples = TimeSamples::new(t0, dt, count);
    let out = appell_transform(&traj, &params, Direction::Forward, &target, samples)?;
    let times = samples.times();
    let v = transform_potential(&triple.potential, &params, &target, &times)?;
    let f = transform_forcing(&forcing, &params, &target, &times)?;
    let r = equation_residual(&out, &v, &f, None)?;
    Ok(ClosureLevel { points, dt, residual: r.l2, relative: r.relative() })
}

/// Residuals over `levels` successive halvings of `(h, dt)` and the observed orders.
pub fn closure_study(triple: &ManufacturedTriple, setup: &ClosureSetup, levels: u32) -> Result<ClosureStudy> {
    if levels < 2 {
        return Err(Error::Domain(format!("an order needs two levels, got {levels}")));
    }
    let levels = (0..levels).map(|k| closure_residual(triple, setup, k)).collect::<Result<Vec<_>>>()?;
    let orders = levels.windows(2).map(|w| (w[0].residual / w[1].residual).log2()).collect();
    Ok(ClosureStudy { levels, orders })
}
