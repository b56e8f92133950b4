//! Bounded complex space-time functions used as potentials `V` and forcings
//! `F`. Every kind implements [`SpaceTimeFn`]; [`SpaceTimeSpec`] is the shared
//! handle passed around the solver and the transforms.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, Trajectory};
use crate::C64;

pub trait SpaceTimeFn: fmt::Debug + Send + Sync {
    fn kind(&self) -> &str;

    fn eval(&self, x: &[f64], t: f64) -> C64;

    /// Certified bound on `|f(x, t)|`.
    fn sup_bound(&self) -> f64;

    fn is_zero(&self) -> bool {
        false
    }

    /// Fills `out` with samples on every grid point at time `t`.
    fn sample(&self, grid: &Grid, t: f64, out: &mut [C64]) {
        let dim = grid.dim();
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.eval(&grid.point(i)[..dim], t);
        }
    }
}

/// Shared handle to a space-time function.
#[derive(Clone, Debug)]
pub struct SpaceTimeSpec(Arc<dyn SpaceTimeFn>);

/// A bounded complex potential `V(x, t)`.
pub type PotentialSpec = SpaceTimeSpec;
/// An additive forcing `F(x, t)`.
pub type ForcingSpec = SpaceTimeSpec;

impl SpaceTimeSpec {
    pub fn new<T: SpaceTimeFn + 'static>(inner: T) -> Self {
        SpaceTimeSpec(Arc::new(inner))
    }

    pub fn from_arc(inner: Arc<dyn SpaceTimeFn>) -> Self {
        SpaceTimeSpec(inner)
    }

    pub fn zero() -> Self {
        Self::new(Zero)
    }

    pub fn constant(value: C64) -> Self {
        Self::new(Constant { value })
    }

    /// `amplitude * exp(-|x - center|^2 / width^2) * cos(frequency * t)`.
    pub fn gaussian_well(amplitude: C64, width: f64, frequency: f64) -> Self {
        Self::new(GaussianWell { amplitude, width, frequency, center: [0.0; 2] })
    }

    pub fn gaussian_well_at(amplitude: C64, width: f64, frequency: f64, center: [f64; 2]) -> Self {
        Self::new(GaussianWell { amplitude, width, frequency, center })
    }

    pub fn sum(parts: Vec<SpaceTimeSpec>) -> Self {
        Self::new(Sum { parts })
    }

    pub fn inner(&self) -> &Arc<dyn SpaceTimeFn> {
        &self.0
    }

    pub fn kind(&self) -> &str {
        self.0.kind()
    }

    pub fn eval(&self, x: &[f64], t: f64) -> C64 {
        self.0.eval(x, t)
    }

    pub fn sup_bound(&self) -> f64 {
        self.0.sup_bound()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn sample(&self, grid: &Grid, t: f64, out: &mut [C64]) {
        self.0.sample(grid, t, out)
    }

    pub fn sampled(&self, grid: &Grid, t: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); grid.len()];
        self.sample(grid, t, &mut out);
        out
    }

    /// Largest `|f|` over the grid points at the given times.
    pub fn measured_sup(&self, grid: &Grid, times: &[f64]) -> f64 {
        let mut buf = vec![C64::new(0.0, 0.0); grid.len()];
        let mut m = 0.0_f64;
        for &t in times {
            self.sample(grid, t, &mut buf);
            m = buf.iter().fold(m, |a, v| a.max(v.norm()));
        }
        m
    }

    /// Checks the certified bound against samples on `grid x times`.
    pub fn validate_bound(&self, grid: &Grid, times: &[f64]) -> Result<f64> {
        let m = self.measured_sup(grid, times);
        let bound = self.sup_bound();
        if m > bound * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::Domain(format!(
                "sampled sup {m:.6e} exceeds the declared bound {bound:.6e}"
            )));
        }
        Ok(m)
    }
}

#[derive(Debug)]
pub struct Zero;

impl SpaceTimeFn for Zero {
    fn kind(&self) -> &str {
        "zero"
    }
    fn eval(&self, _x: &[f64], _t: f64) -> C64 {
        C64::new(0.0, 0.0)
    }
    fn sup_bound(&self) -> f64 {
        0.0
    }
    fn is_zero(&self) -> bool {
        true
    }
    fn sample(&self, _grid: &Grid, _t: f64, out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
    }
}

#[derive(Debug)]
pub struct Constant {
    pub value: C64,
}

impl SpaceTimeFn for Constant {
    fn kind(&self) -> &str {
        "constant"
    }
    fn eval(&self, _x: &[f64], _t: f64) -> C64 {
        self.value
    }
    fn sup_bound(&self) -> f64 {
        self.value.norm()
    }
    fn is_zero(&self) -> bool {
        self.value == C64::new(0.0, 0.0)
    }
    fn sample(&self, _grid: &Grid, _t: f64, out: &mut [C64]) {
        out.fill(self.value);
    }
}

#[derive(Debug)]
pub struct GaussianWell {
    pub amplitude: C64,
    pub width: f64,
    pub frequency: f64,
    pub center: [f64; 2],
}

impl SpaceTimeFn for GaussianWell {
    fn kind(&self) -> &str {
        "gaussian_well"
    }
    fn eval(&self, x: &[f64], t: f64) -> C64 {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        self.amplitude * ((-r2 / (self.width * self.width)).exp() * (self.frequency * t).cos())
    }
    fn sup_bound(&self) -> f64 {
        self.amplitude.norm()
    }
    fn is_zero(&self) -> bool {
        self.amplitude == C64::new(0.0, 0.0)
    }
}

#[derive(Debug)]
pub struct Sum {
    pub parts: Vec<SpaceTimeSpec>,
}

impl SpaceTimeFn for Sum {
    fn kind(&self) -> &str {
        "sum"
    }
    fn eval(&self, x: &[f64], t: f64) -> C64 {
        self.parts.iter().map(|p| p.eval(x, t)).sum()
    }
    fn sup_bound(&self) -> f64 {
        self.parts.iter().map(|p| p.sup_bound()).sum()
    }
    fn is_zero(&self) -> bool {
        self.parts.iter().all(|p| p.is_zero())
    }
    fn sample(&self, grid: &Grid, t: f64, out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
        let mut buf = vec![C64::new(0.0, 0.0); out.len()];
        for p in &self.parts {
            p.sample(grid, t, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += b;
            }
        }
    }
}

/// Values stored on a grid at uniformly spaced times; linear in time, nearest
/// grid point in space.
#[derive(Debug)]
pub struct Sampled {
    grid: Arc<Grid>,
    t0: f64,
    dt: f64,
    slices: Vec<Vec<C64>>,
    sup: f64,
}

impl Sampled {
    pub fn new(grid: Arc<Grid>, t0: f64, dt: f64, slices: Vec<Vec<C64>>) -> Result<Self> {
        if slices.is_empty() || slices.iter().any(|s| s.len() != grid.len()) {
            return Err(Error::Mismatch("sampled slices do not match grid".into()));
        }
        let sup = slices.iter().flatten().fold(0.0_f64, |a, v| a.max(v.norm()));
        if !sup.is_finite() {
            return Err(Error::NonFinite("sampled potential".into()));
        }
        Ok(Sampled { grid, t0, dt, slices, sup })
    }

    pub fn from_trajectory(traj: &Trajectory) -> Result<Self> {
        let slices = traj.fields().iter().map(|f| f.values().to_vec()).collect();
        Sampled::new(traj.grid().clone(), traj.t_start(), traj.dt(), slices)
    }

    pub fn slices(&self) -> &[Vec<C64>] {
        &self.slices
    }

    fn bracket(&self, t: f64) -> (usize, usize, f64) {
        let n = self.slices.len();
        if n == 1 {
            return (0, 0, 0.0);
        }
        let pos = ((t - self.t0) / self.dt).clamp(0.0, (n - 1) as f64);
        let k = (pos.floor() as usize).min(n - 2);
        (k, k + 1, pos - k as f64)
    }

    fn nearest(&self, x: &[f64]) -> usize {
        let g = &self.grid;
        let n = g.points_per_axis();
        let idx = |c: f64| {
            let p = ((c + g.half_width()) / g.spacing()).round() as isize;
            p.rem_euclid(n as isize) as usize
        };
        if g.dim() == 1 {
            idx(x[0])
        } else {
            idx(x[0]) * n + idx(x[1])
        }
    }
}

impl SpaceTimeFn for Sampled {
    fn kind(&self) -> &str {
        "sampled"
    }
    fn eval(&self, x: &[f64], t: f64) -> C64 {
        let i = self.nearest(x);
        let (a, b, w) = self.bracket(t);
        self.slices[a][i] * (1.0 - w) + self.slices[b][i] * w
    }
    fn sup_bound(&self) -> f64 {
        self.sup
    }
    fn is_zero(&self) -> bool {
        self.sup == 0.0
    }
    fn sample(&self, grid: &Grid, t: f64, out: &mut [C64]) {
        if grid != self.grid.as_ref() {
            let dim = grid.dim();
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.eval(&grid.point(i)[..dim], t);
            }
            return;
        }
        let (a, b, w) = self.bracket(t);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.slices[a][i] * (1.0 - w) + self.slices[b][i] * w;
        }
    }
}
