//! Time integration of `du/dt = i (Lap u + V u + F)` by Strang splitting with
//! an exact spectral kinetic step, the closed-form free propagator, and the
//! effective potential of the difference of two nonlinear solutions.

mod packet;
pub mod potential;
mod registry;

use std::sync::Arc;

pub use packet::GaussianPacket;
pub use potential::{ForcingSpec, PotentialSpec, Sampled, SpaceTimeFn, SpaceTimeSpec};
pub use registry::{param, param_or, Params, SpaceTimeRegistry};

use crate::error::{Error, Result};
use crate::grid::{Grid, Trajectory, WaveField};
use crate::sum::pairwise_by;
use crate::C64;

/// Largest admissible `dt * sup |Im V|`.
pub const GAIN_GUARD: f64 = 0.1;
/// Boundary layer width, in cells, watched by [`solve`].
pub const EDGE_CELLS: usize = 3;
/// Largest admissible fraction of the mass inside the boundary layer.
pub const EDGE_MASS_TOLERANCE: f64 = 1e-8;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// `(e^z - 1) / z`, stable near zero.
fn phi1(z: C64) -> C64 {
    if z.norm() < 1e-5 {
        C64::new(1.0, 0.0) + z / 2.0 + z * z / 6.0
    } else {
        (z.exp() - 1.0) / z
    }
}

/// Reusable Strang integrator for a fixed grid and step.
pub struct StrangStepper {
    grid: Arc<Grid>,
    dt: f64,
    kinetic: Vec<C64>,
    v_buf: Vec<C64>,
    f_buf: Vec<C64>,
}

impl StrangStepper {
    pub fn new(grid: Arc<Grid>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let kinetic = (0..grid.len()).map(|i| C64::from_polar(1.0, -dt * grid.k_squared(i))).collect();
        let n = grid.len();
        Ok(StrangStepper { grid, dt, kinetic, v_buf: vec![ZERO; n], f_buf: vec![ZERO; n] })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Exact free evolution over one step.
    fn kinetic(&self, u: &mut [C64]) {
        self.grid.forward(u);
        for (c, p) in u.iter_mut().zip(&self.kinetic) {
            *c *= p;
        }
        self.grid.inverse(u);
    }

    /// Exact solution of `du/dt = i (V u + F)` over `tau` with `V`, `F`
    /// frozen at `t_mid`.
    fn local_half(&mut self, u: &mut [C64], v: &PotentialSpec, f: &ForcingSpec, t_mid: f64, tau: f64) -> Result<()> {
        let has_v = !v.is_zero();
        let has_f = !f.is_zero();
        if has_v {
            v.sample(&self.grid, t_mid, &mut self.v_buf);
            let gain = self.v_buf.iter().fold(0.0_f64, |a, z| a.max(z.im.abs()));
            if gain * self.dt > GAIN_GUARD {
                return Err(Error::Stability(format!(
                    "dt * sup|Im V| = {:.3e} exceeds {GAIN_GUARD}",
                    gain * self.dt
                )));
            }
        }
        if has_f {
            f.sample(&self.grid, t_mid, &mut self.f_buf);
        }
        match (has_v, has_f) {
            (false, false) => {}
            (true, false) => {
                for (w, p) in u.iter_mut().zip(&self.v_buf) {
                    *w *= (C64::i() * p * tau).exp();
                }
            }
            (false, true) => {
                for (w, q) in u.iter_mut().zip(&self.f_buf) {
                    *w += C64::i() * tau * q;
                }
            }
            (true, true) => {
                for ((w, p), q) in u.iter_mut().zip(&self.v_buf).zip(&self.f_buf) {
                    let z = C64::i() * p * tau;
                    *w = z.exp() * *w + C64::i() * tau * phi1(z) * q;
                }
            }
        }
        Ok(())
    }

    /// Advances `u` from `t` to `t + dt` in place.
    pub fn step(&mut self, u: &mut [C64], v: &PotentialSpec, f: &ForcingSpec, t: f64) -> Result<()> {
        let half = 0.5 * self.dt;
        self.local_half(u, v, f, t + 0.25 * self.dt, half)?;
        self.kinetic(u);
        self.local_half(u, v, f, t + 0.75 * self.dt, half)?;
        if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(format!("solution blew up at t = {}", t + self.dt)));
        }
        Ok(())
    }

    /// Step of `du/dt = i (Lap u + f(|u|^2) u)`. The nonlinear phase is exact
    /// because it leaves `|u|` unchanged.
    pub fn step_nls(&mut self, u: &mut [C64], nonlinearity: &dyn Fn(f64) -> f64) -> Result<()> {
        let half = 0.5 * self.dt;
        let phase = |u: &mut [C64]| {
            for w in u.iter_mut() {
                *w *= C64::from_polar(1.0, nonlinearity(w.norm_sqr()) * half);
            }
        };
        phase(u);
        self.kinetic(u);
        phase(u);
        if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("nonlinear solution blew up".into()));
        }
        Ok(())
    }
}

/// One Strang step from `state` at time `t`.
pub fn step_strang(state: &WaveField, v: &PotentialSpec, f: &ForcingSpec, t: f64, dt: f64) -> Result<WaveField> {
    let mut stepper = StrangStepper::new(state.grid().clone(), dt)?;
    let mut u = state.values().to_vec();
    stepper.step(&mut u, v, f, t)?;
    WaveField::new(state.grid().clone(), u, t + dt)
}

/// Integration horizon, step and storage stride.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Store every `stride`-th step.
    pub stride: usize,
}

impl SolveOptions {
    pub fn new(t_end: f64, dt: f64) -> Self {
        SolveOptions { t_end, dt, stride: 1 }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    fn steps(&self) -> Result<usize> {
        if !(self.t_end > 0.0) {
            return Err(Error::Domain(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        if self.stride == 0 {
            return Err(Error::Domain("stride must be at least 1".into()));
        }
        let n = (self.t_end / self.dt).round();
        if n < 1.0 || (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::Domain(format!("dt = {} does not divide t_end = {}", self.dt, self.t_end)));
        }
        let n = n as usize;
        if !n.is_multiple_of(self.stride) {
            return Err(Error::Domain(format!("stride {} does not divide the {n} steps", self.stride)));
        }
        Ok(n)
    }
}

/// Fraction of the mass within [`EDGE_CELLS`] of the box edge.
pub fn edge_mass_fraction(field: &WaveField) -> f64 {
    let g = field.grid();
    let u = field.values();
    let total = pairwise_by(u.len(), |i| u[i].norm_sqr());
    if total == 0.0 {
        return 0.0;
    }
    let edge = pairwise_by(u.len(), |i| if g.edge_distance_cells(i) < EDGE_CELLS { u[i].norm_sqr() } else { 0.0 });
    edge / total
}

fn check_edge(field: &WaveField) -> Result<()> {
    let fraction = edge_mass_fraction(field);
    if fraction > EDGE_MASS_TOLERANCE {
        return Err(Error::BoundaryMass { fraction, time: field.time() });
    }
    Ok(())
}

/// Solves from `u0` (taken at `t = 0`) to `t_end`, storing every step.
pub fn solve(u0: &WaveField, v: &PotentialSpec, f: &ForcingSpec, t_end: f64, dt: f64) -> Result<Trajectory> {
    solve_with(u0, v, f, SolveOptions::new(t_end, dt))
}

pub fn solve_with(u0: &WaveField, v: &PotentialSpec, f: &ForcingSpec, opts: SolveOptions) -> Result<Trajectory> {
    let steps = opts.steps()?;
    let grid = u0.grid().clone();
    let mut stepper = StrangStepper::new(grid.clone(), opts.dt)?;
    let mut u = u0.values().to_vec();
    let first = WaveField::new(grid.clone(), u.clone(), 0.0)?;
    check_edge(&first)?;
    let mut fields = vec![first];
    for k in 0..steps {
        stepper.step(&mut u, v, f, k as f64 * opts.dt)?;
        if (k + 1) % opts.stride == 0 {
            let field = WaveField::new(grid.clone(), u.clone(), (k + 1) as f64 * opts.dt)?;
            check_edge(&field)?;
            fields.push(field);
        }
    }
    let stored_dt = opts.dt * opts.stride as f64;
    let slices = fields.into_iter().map(|f| f.into_values()).collect();
    Trajectory::new(grid, 0.0, stored_dt, slices)
}

/// Solves the cubic-type nonlinear equation `du/dt = i (Lap u + f(|u|^2) u)`.
pub fn solve_nls(u0: &WaveField, nonlinearity: &dyn Fn(f64) -> f64, opts: SolveOptions) -> Result<Trajectory> {
    let steps = opts.steps()?;
    let grid = u0.grid().clone();
    let mut stepper = StrangStepper::new(grid.clone(), opts.dt)?;
    let mut u = u0.values().to_vec();
    check_edge(u0)?;
    let mut slices = vec![u.clone()];
    for k in 0..steps {
        stepper.step_nls(&mut u, nonlinearity)?;
        if (k + 1) % opts.stride == 0 {
            slices.push(u.clone());
        }
    }
    let traj = Trajectory::new(grid, 0.0, opts.dt * opts.stride as f64, slices)?;
    for f in traj.fields() {
        check_edge(f)?;
    }
    Ok(traj)
}

/// `e^{i t Lap} u0` through the exact multiplier `e^{-i t |k|^2}`.
pub fn free_propagate(u0: &WaveField, t: f64) -> WaveField {
    let grid = u0.grid().clone();
    let mut buf = u0.values().to_vec();
    if t != 0.0 {
        grid.forward(&mut buf);
        for (i, c) in buf.iter_mut().enumerate() {
            *c *= C64::from_polar(1.0, -t * grid.k_squared(i));
        }
        grid.inverse(&mut buf);
    }
    WaveField::new(grid, buf, u0.time() + t).expect("unitary multiplier keeps values finite")
}

/// Effective potential of `w = u1 - u2` for two solutions of the nonlinear
/// equation, with the set where `|w| < floor` recorded separately.
#[derive(Clone, Debug)]
pub struct DifferencePotential {
    pub potential: PotentialSpec,
    /// Per stored slice: `true` where `|w|` fell below the floor.
    pub floor_mask: Vec<Vec<bool>>,
    /// Space-time measure of the floor layer.
    pub floor_measure: f64,
}

/// Quotient `(f(|u1|^2) u1 - f(|u2|^2) u2) / (u1 - u2)` where `|u1 - u2|`
/// is at least `floor`, zero elsewhere.
pub fn nls_difference_potential(
    u1: &Trajectory,
    u2: &Trajectory,
    nonlinearity: &dyn Fn(f64) -> f64,
    floor: f64,
) -> Result<DifferencePotential> {
    if !(floor > 0.0) {
        return Err(Error::Domain(format!("floor must be positive, got {floor}")));
    }
    if u1.grid() != u2.grid() && u1.grid().as_ref() != u2.grid().as_ref() {
        return Err(Error::Mismatch("trajectories on different grids".into()));
    }
    if u1.len() != u2.len() || u1.dt() != u2.dt() || u1.t_start() != u2.t_start() {
        return Err(Error::Mismatch("trajectories sampled at different times".into()));
    }
    let grid = u1.grid().clone();
    let mut slices = Vec::with_capacity(u1.len());
    let mut mask = Vec::with_capacity(u1.len());
    for k in 0..u1.len() {
        let a = u1.field(k).values();
        let b = u2.field(k).values();
        let mut vals = vec![ZERO; a.len()];
        let mut m = vec![false; a.len()];
        for i in 0..a.len() {
            let w = a[i] - b[i];
            if w.norm() >= floor {
                let num = a[i] * nonlinearity(a[i].norm_sqr()) - b[i] * nonlinearity(b[i].norm_sqr());
                vals[i] = num / w;
            } else {
                m[i] = true;
            }
        }
        slices.push(vals);
        mask.push(m);
    }
    let cell = grid.cell_volume();
    let floor_measure = mask.iter().map(|m| m.iter().filter(|b| **b).count() as f64 * cell).sum::<f64>() * u1.dt();
    let sampled = Sampled::new(grid, u1.t_start(), u1.dt(), slices)?;
    Ok(DifferencePotential { potential: SpaceTimeSpec::new(sampled), floor_mask: mask, floor_measure })
}

/// Space-time residual of a stored trajectory against the equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquationResidual {
    /// `(dt * sum_k ||r_k||^2)^(1/2)` over interior slices.
    pub l2: f64,
    /// Same norm of the centred time derivative alone.
    pub reference: f64,
}

impl EquationResidual {
    pub fn relative(&self) -> f64 {
        if self.reference == 0.0 {
            0.0
        } else {
            self.l2 / self.reference
        }
    }
}

/// Residual `(u_{k+1} - u_{k-1}) / (2 dt) - i (Lap u_k + V u_k + F)` on all
/// interior slices; points flagged in `exclude` are left out.
pub fn equation_residual(
    traj: &Trajectory,
    v: &PotentialSpec,
    f: &ForcingSpec,
    exclude: Option<&[Vec<bool>]>,
) -> Result<EquationResidual> {
    if traj.len() < 3 {
        return Err(Error::Coverage("residual needs at least three slices".into()));
    }
    let grid = traj.grid();
    let dt = traj.dt();
    let n = grid.len();
    let mut vbuf = vec![ZERO; n];
    let mut fbuf = vec![ZERO; n];
    let mut res = Vec::with_capacity(traj.len() - 2);
    let mut refs = Vec::with_capacity(traj.len() - 2);
    for k in 1..traj.len() - 1 {
        let t = traj.time(k);
        let u = traj.field(k).values();
        let up = traj.field(k + 1).values();
        let um = traj.field(k - 1).values();
        let lap = grid.laplacian(u);
        v.sample(grid, t, &mut vbuf);
        f.sample(grid, t, &mut fbuf);
        let skip = |i: usize| exclude.map(|m| m[k][i]).unwrap_or(false);
        let r = grid.integrate(|i| {
            if skip(i) {
                return 0.0;
            }
            let dudt = (up[i] - um[i]) / (2.0 * dt);
            (dudt - C64::i() * (lap[i] + vbuf[i] * u[i] + fbuf[i])).norm_sqr()
        });
        let d = grid.integrate(|i| if skip(i) { 0.0 } else { ((up[i] - um[i]) / (2.0 * dt)).norm_sqr() });
        res.push(r);
        refs.push(d);
    }
    let l2 = (dt * pairwise_by(res.len(), |k| res[k])).sqrt();
    let reference = (dt * pairwise_by(refs.len(), |k| refs[k])).sqrt();
    Ok(EquationResidual { l2, reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn gaussian(grid: &Arc<Grid>) -> WaveField {
        WaveField::from_fn(grid.clone(), 0.0, |x| C64::new((-x[0] * x[0] / 4.0).exp(), 0.0)).unwrap()
    }

    #[test]
    fn free_step_is_exact() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let u = gaussian(&g);
        let s = step_strang(&u, &SpaceTimeSpec::zero(), &SpaceTimeSpec::zero(), 0.0, 0.01).unwrap();
        let e = free_propagate(&u, 0.01);
        assert!(s.max_abs_diff(&e) <= 1e-12);
    }

    #[test]
    fn real_constant_is_a_gauge_phase() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let u = gaussian(&g);
        let c = 0.7;
        let dt = 0.02;
        let s = step_strang(&u, &SpaceTimeSpec::constant(C64::new(c, 0.0)), &SpaceTimeSpec::zero(), 0.0, dt).unwrap();
        let e = free_propagate(&u, dt).scaled(C64::from_polar(1.0, c * dt));
        assert!(s.max_abs_diff(&e) <= 1e-12);
    }

    #[test]
    fn imaginary_constant_damps_mass() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let u = gaussian(&g);
        let v0 = 0.8;
        let dt = 0.05;
        let s = step_strang(&u, &SpaceTimeSpec::constant(C64::new(0.0, v0)), &SpaceTimeSpec::zero(), 0.0, dt).unwrap();
        let ratio = s.mass() / u.mass();
        assert!((ratio / (-2.0 * v0 * dt).exp() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn gain_guard_refuses_large_steps() {
        let g = make_grid(1, 16.0, 64).unwrap();
        let u = gaussian(&g);
        let v = SpaceTimeSpec::constant(C64::new(0.0, -5.0));
        let r = step_strang(&u, &v, &SpaceTimeSpec::zero(), 0.0, 0.05);
        assert!(matches!(r, Err(Error::Stability(_))));
    }

    #[test]
    fn free_step_is_reversible() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let u = gaussian(&g);
        let z = SpaceTimeSpec::zero();
        let fwd = step_strang(&u, &z, &z, 0.0, 0.03).unwrap();
        let back = free_propagate(&fwd, -0.03);
        assert!(back.max_abs_diff(&u) <= 1e-12);
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = make_grid(1, 8.0, 64).unwrap();
        let u = WaveField::zeros(g, 0.0);
        let v = SpaceTimeSpec::gaussian_well(C64::new(1.0, 0.5), 1.0, 2.0);
        let t = solve(&u, &v, &SpaceTimeSpec::zero(), 0.1, 0.01).unwrap();
        assert_eq!(t.len(), 11);
        assert!(t.is_identically_zero());
    }

    #[test]
    fn solve_rejects_non_dividing_step() {
        let g = make_grid(1, 8.0, 64).unwrap();
        let u = gaussian(&g);
        let z = SpaceTimeSpec::zero();
        assert!(matches!(solve(&u, &z, &z, 0.1, 0.03), Err(Error::Domain(_))));
        assert!(matches!(solve(&u, &z, &z, -0.1, 0.01), Err(Error::Domain(_))));
    }

    #[test]
    fn boundary_mass_violation_detected() {
        let g = make_grid(1, 4.0, 64).unwrap();
        let u = WaveField::from_fn(g, 0.0, |x| C64::new((-x[0] * x[0] / 8.0).exp(), 0.0)).unwrap();
        let z = SpaceTimeSpec::zero();
        assert!(matches!(solve(&u, &z, &z, 0.1, 0.01), Err(Error::BoundaryMass { .. })));
    }

    #[test]
    fn forcing_only_adds_linearly() {
        let g = make_grid(1, 8.0, 64).unwrap();
        let u = WaveField::zeros(g.clone(), 0.0);
        let f = SpaceTimeSpec::constant(C64::new(1.0, 0.0));
        let s = step_strang(&u, &SpaceTimeSpec::zero(), &f, 0.0, 0.1).unwrap();
        // d/dt u = i (Lap u + 1) from zero gives u = i t exactly (constant mode)
        for v in s.values() {
            assert!((v - C64::new(0.0, 0.1)).norm() < 1e-14);
        }
    }

    #[test]
    fn identical_nls_runs_have_zero_difference_potential() {
        let g = make_grid(1, 12.0, 128).unwrap();
        let u = gaussian(&g);
        let f = |r: f64| r * r;
        let a = solve_nls(&u, &f, SolveOptions::new(0.1, 0.01)).unwrap();
        let d = nls_difference_potential(&a, &a, &f, 1e-6).unwrap();
        assert!(d.potential.is_zero());
        let zero_f = |_r: f64| 0.0;
        let b = solve_nls(&u.scaled(C64::new(1.1, 0.0)), &zero_f, SolveOptions::new(0.1, 0.01)).unwrap();
        let c = solve_nls(&u, &zero_f, SolveOptions::new(0.1, 0.01)).unwrap();
        let d = nls_difference_potential(&b, &c, &zero_f, 1e-6).unwrap();
        assert_eq!(d.potential.sup_bound(), 0.0);
    }

    #[test]
    fn difference_potential_rejects_mismatch() {
        let g = make_grid(1, 12.0, 128).unwrap();
        let u = gaussian(&g);
        let f = |r: f64| r;
        let a = solve_nls(&u, &f, SolveOptions::new(0.1, 0.01)).unwrap();
        let b = solve_nls(&u, &f, SolveOptions::new(0.2, 0.01)).unwrap();
        assert!(matches!(nls_difference_potential(&a, &b, &f, 1e-6), Err(Error::Mismatch(_))));
    }
}
