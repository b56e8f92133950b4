//! Periodic spatial lattice with spectral differentiation and region
//! quadrature.
//!
//! The box is `[-half_width, half_width)` along each of `dim` axes, sampled at
//! `points_per_axis` equispaced points. In two dimensions the flat index is
//! `i0 * n + i1`, axis 0 being the first coordinate `x_1`.

use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::sum::{pairwise_by, pairwise_by_c};
use crate::C64;

pub struct Grid {
    dim: usize,
    half_width: f64,
    points: usize,
    spacing: f64,
    wavenumbers: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("half_width", &self.half_width)
            .field("points_per_axis", &self.points)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points && self.half_width == other.half_width
    }
}

/// Builds a grid after validating the discretisation parameters.
pub fn make_grid(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Arc<Grid>> {
    Grid::new(dim, half_width, points_per_axis)
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Arc<Grid>> {
        if dim != 1 && dim != 2 {
            return Err(Error::Grid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Grid(format!("half_width must be positive, got {half_width}")));
        }
        if points_per_axis < 8 {
            return Err(Error::Grid(format!(
                "points_per_axis must be at least 8, got {points_per_axis}"
            )));
        }
        if !points_per_axis.is_multiple_of(2) {
            return Err(Error::Grid(format!("points_per_axis must be even, got {points_per_axis}")));
        }
        let n = points_per_axis;
        let spacing = 2.0 * half_width / n as f64;
        let dk = std::f64::consts::PI / half_width;
        let wavenumbers = (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as isize } else { j as isize - n as isize };
                m as f64 * dk
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        Ok(Arc::new(Grid { dim, half_width, points: n, spacing, wavenumbers, fft, ifft }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn box_length(&self) -> f64 {
        2.0 * self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Discrete spectral frequencies, FFT order. Index `n/2` holds the
    /// (negative) Nyquist frequency.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Total number of samples, `points_per_axis^dim`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Coordinate of index `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing
    }

    pub fn axis_indices(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.points, idx % self.points]
        }
    }

    /// Position of sample `idx`; the second entry is zero in one dimension.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let [i0, i1] = self.axis_indices(idx);
        if self.dim == 1 {
            [self.coord(i0), 0.0]
        } else {
            [self.coord(i0), self.coord(i1)]
        }
    }

    pub fn radius(&self, idx: usize) -> f64 {
        let p = self.point(idx);
        (p[0] * p[0] + p[1] * p[1]).sqrt()
    }

    /// Distance, in cells, from sample `idx` to the nearest box edge.
    pub fn edge_distance_cells(&self, idx: usize) -> usize {
        let [i0, i1] = self.axis_indices(idx);
        let d = |i: usize| i.min(self.points - 1 - i);
        if self.dim == 1 {
            d(i0)
        } else {
            d(i0).min(d(i1))
        }
    }

    /// Derivative symbol along one axis: the wavenumber with the Nyquist
    /// coefficient zeroed.
    pub fn derivative_symbol(&self, j: usize) -> f64 {
        if j == self.points / 2 {
            0.0
        } else {
            self.wavenumbers[j]
        }
    }

    /// `|k|^2` for spectral index `idx` (Nyquist retained).
    pub fn k_squared(&self, idx: usize) -> f64 {
        let [j0, j1] = self.axis_indices(idx);
        let k0 = self.wavenumbers[j0];
        if self.dim == 1 {
            k0 * k0
        } else {
            let k1 = self.wavenumbers[j1];
            k0 * k0 + k1 * k1
        }
    }

    fn check_len(&self, data: &[C64]) {
        assert_eq!(data.len(), self.len(), "buffer length does not match grid");
    }

    /// Unnormalised forward DFT in place.
    pub fn forward(&self, data: &mut [C64]) {
        self.check_len(data);
        self.transform(data, &self.fft);
    }

    /// Inverse DFT in place, normalised so that `inverse(forward(u)) == u`.
    pub fn inverse(&self, data: &mut [C64]) {
        self.check_len(data);
        self.transform(data, &self.ifft);
        let scale = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn transform(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.points;
        // rows (or the single axis) are contiguous
        plan.process(data);
        if self.dim == 2 {
            let mut t = vec![C64::new(0.0, 0.0); data.len()];
            transpose(data, &mut t, n);
            plan.process(&mut t);
            transpose(&t, data, n);
        }
    }

    /// Spectral coefficients of `values` (unnormalised DFT).
    pub fn spectrum(&self, values: &[C64]) -> Vec<C64> {
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        buf
    }

    /// Spectral partial derivative along `axis`.
    pub fn derivative(&self, values: &[C64], axis: usize) -> Vec<C64> {
        assert!(axis < self.dim);
        let mut buf = self.spectrum(values);
        for (idx, c) in buf.iter_mut().enumerate() {
            let j = self.axis_indices(idx)[axis];
            *c *= C64::new(0.0, self.derivative_symbol(j));
        }
        self.inverse(&mut buf);
        buf
    }

    pub fn gradient(&self, values: &[C64]) -> Vec<Vec<C64>> {
        (0..self.dim).map(|a| self.derivative(values, a)).collect()
    }

    pub fn laplacian(&self, values: &[C64]) -> Vec<C64> {
        let mut buf = self.spectrum(values);
        for (idx, c) in buf.iter_mut().enumerate() {
            *c *= -self.k_squared(idx);
        }
        self.inverse(&mut buf);
        buf
    }

    /// `sum_i f(i) * h^dim`, summed pairwise.
    pub fn integrate<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        self.cell_volume() * pairwise_by(self.len(), f)
    }

    pub fn integrate_c<F: Fn(usize) -> C64>(&self, f: F) -> C64 {
        pairwise_by_c(self.len(), f) * self.cell_volume()
    }
}

fn transpose(src: &[C64], dst: &mut [C64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            dst[j * n + i] = src[i * n + j];
        }
    }
}

/// Complex samples of a field at one time.
#[derive(Clone, Debug)]
pub struct WaveField {
    grid: Arc<Grid>,
    values: Vec<C64>,
    time: f64,
}

impl WaveField {
    pub fn new(grid: Arc<Grid>, values: Vec<C64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Mismatch(format!(
                "field has {} values, grid expects {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("wave field".into()));
        }
        Ok(WaveField { grid, values, time })
    }

    pub fn zeros(grid: Arc<Grid>, time: f64) -> Self {
        let values = vec![C64::new(0.0, 0.0); grid.len()];
        WaveField { grid, values, time }
    }

    /// Samples `f` at every grid point. `f` receives the position truncated to
    /// the grid dimension.
    pub fn from_fn<F: Fn(&[f64]) -> C64>(grid: Arc<Grid>, time: f64, f: F) -> Result<Self> {
        let dim = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..dim])).collect();
        WaveField::new(grid, values, time)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(|i| self.values[i].norm_sqr())
    }

    pub fn norm(&self) -> f64 {
        self.mass().sqrt()
    }

    /// L2 norm of `self - other`.
    pub fn distance(&self, other: &WaveField) -> f64 {
        self.grid.integrate(|i| (self.values[i] - other.values[i]).norm_sqr()).sqrt()
    }

    pub fn max_abs_diff(&self, other: &WaveField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: C64) -> WaveField {
        let values = self.values.iter().map(|v| v * factor).collect();
        WaveField { grid: self.grid.clone(), values, time: self.time }
    }

    pub fn laplacian(&self) -> WaveField {
        WaveField { grid: self.grid.clone(), values: self.grid.laplacian(&self.values), time: self.time }
    }

    /// Pointwise `|grad u|^2`.
    pub fn gradient_density(&self) -> Vec<f64> {
        let g = self.grid.gradient(&self.values);
        (0..self.values.len()).map(|i| g.iter().map(|c| c[i].norm_sqr()).sum()).collect()
    }
}

/// Spectral gradient, one field per axis.
pub fn spectral_gradient(field: &WaveField) -> Result<Vec<WaveField>> {
    if field.values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("spectral_gradient input".into()));
    }
    Ok(field
        .grid
        .gradient(&field.values)
        .into_iter()
        .map(|values| WaveField { grid: field.grid.clone(), values, time: field.time })
        .collect())
}

/// What [`quadrature`] integrates.
#[derive(Clone, Copy, Debug)]
pub enum Integrand<'a> {
    /// `|u|^2`
    Mass,
    /// `|grad u|^2`
    GradientSquared,
    /// `u * conj(w)`
    Inner(&'a WaveField),
}

/// Riemann sum `h^dim * sum` over grid points satisfying `region`.
pub fn quadrature<R: Fn(&[f64]) -> bool>(
    field: &WaveField,
    region: R,
    integrand: Integrand<'_>,
) -> Result<C64> {
    let grid = &field.grid;
    let dim = grid.dim();
    let inside: Vec<bool> = (0..grid.len()).map(|i| region(&grid.point(i)[..dim])).collect();
    let u = &field.values;
    Ok(match integrand {
        Integrand::Mass => C64::new(grid.integrate(|i| if inside[i] { u[i].norm_sqr() } else { 0.0 }), 0.0),
        Integrand::GradientSquared => {
            let g = field.gradient_density();
            C64::new(grid.integrate(|i| if inside[i] { g[i] } else { 0.0 }), 0.0)
        }
        Integrand::Inner(w) => {
            if w.grid.as_ref() != grid.as_ref() {
                return Err(Error::Mismatch("inner product across different grids".into()));
            }
            grid.integrate_c(|i| if inside[i] { u[i] * w.values[i].conj() } else { C64::new(0.0, 0.0) })
        }
    })
}

/// Time-indexed family of fields with a uniform step.
#[derive(Clone, Debug)]
pub struct Trajectory {
    grid: Arc<Grid>,
    t0: f64,
    dt: f64,
    fields: Vec<WaveField>,
}

impl Trajectory {
    pub fn new(grid: Arc<Grid>, t0: f64, dt: f64, slices: Vec<Vec<C64>>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("trajectory step must be positive, got {dt}")));
        }
        if slices.is_empty() {
            return Err(Error::Domain("trajectory needs at least one slice".into()));
        }
        let fields = slices
            .into_iter()
            .enumerate()
            .map(|(k, v)| WaveField::new(grid.clone(), v, t0 + k as f64 * dt))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory { grid, t0, dt, fields })
    }

    /// Assembles a trajectory from fields that already carry their times.
    pub fn from_fields(fields: Vec<WaveField>) -> Result<Self> {
        let first = fields.first().ok_or_else(|| Error::Domain("empty trajectory".into()))?;
        let grid = first.grid.clone();
        let t0 = first.time;
        let dt = if fields.len() > 1 { fields[1].time - t0 } else { 1.0 };
        if fields.len() > 1 && !(dt > 0.0) {
            return Err(Error::Domain("times must be strictly increasing".into()));
        }
        for (k, f) in fields.iter().enumerate() {
            if f.grid.as_ref() != grid.as_ref() {
                return Err(Error::Mismatch("trajectory fields on different grids".into()));
            }
            let expect = t0 + k as f64 * dt;
            if (f.time - expect).abs() > 1e-12 * expect.abs().max(dt) * (k as f64).max(1.0) {
                return Err(Error::Domain(format!("non-uniform time step at slice {k}")));
            }
        }
        Ok(Trajectory { grid, t0, dt, fields })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn field(&self, k: usize) -> &WaveField {
        &self.fields[k]
    }

    pub fn fields(&self) -> &[WaveField] {
        &self.fields
    }

    pub fn last(&self) -> &WaveField {
        self.fields.last().expect("non-empty")
    }

    /// Whether `[a, b]` lies inside the stored time range (with a small
    /// tolerance for rounding).
    pub fn covers(&self, a: f64, b: f64) -> bool {
        let tol = 1e-9 * self.dt;
        a >= self.t0 - tol && b <= self.t_end() + tol
    }

    /// Multiplies every slice by `factor`.
    pub fn scaled(&self, factor: C64) -> Trajectory {
        Trajectory {
            grid: self.grid.clone(),
            t0: self.t0,
            dt: self.dt,
            fields: self.fields.iter().map(|f| f.scaled(factor)).collect(),
        }
    }

    /// Keeps every `stride`-th slice.
    pub fn subsample(&self, stride: usize) -> Trajectory {
        assert!(stride >= 1);
        Trajectory {
            grid: self.grid.clone(),
            t0: self.t0,
            dt: self.dt * stride as f64,
            fields: self.fields.iter().step_by(stride).cloned().collect(),
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        self.fields.iter().all(|f| f.values.iter().all(|v| *v == C64::new(0.0, 0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn spacing_matches_box() {
        let g = make_grid(1, 16.0, 256).unwrap();
        assert_eq!(g.spacing(), 0.125);
        assert_eq!(g.spacing() * 256.0, 32.0);
        let t = make_grid(1, PI, 32).unwrap();
        assert!((t.spacing() - PI / 16.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(make_grid(1, 16.0, 255), Err(Error::Grid(_))));
        assert!(matches!(make_grid(1, 16.0, 6), Err(Error::Grid(_))));
        assert!(matches!(make_grid(1, 0.0, 64), Err(Error::Grid(_))));
        assert!(matches!(make_grid(1, -1.0, 64), Err(Error::Grid(_))));
        assert!(matches!(make_grid(3, 1.0, 64), Err(Error::Grid(_))));
    }

    #[test]
    fn zero_wavenumber_appears_once() {
        let g = make_grid(1, 5.0, 64).unwrap();
        assert_eq!(g.wavenumbers().iter().filter(|k| **k == 0.0).count(), 1);
        assert_eq!(g.wavenumbers()[1], PI / 5.0);
        assert_eq!(g.wavenumbers()[32], -32.0 * PI / 5.0);
    }

    #[test]
    fn gradient_of_sine_is_cosine() {
        let g = make_grid(1, PI, 32).unwrap();
        let f = WaveField::from_fn(g.clone(), 0.0, |x| C64::new(x[0].sin(), 0.0)).unwrap();
        let d = spectral_gradient(&f).unwrap();
        for i in 0..g.len() {
            let x = g.point(i)[0];
            assert!((d[0].values()[i] - C64::new(x.cos(), 0.0)).norm() <= 1e-12);
        }
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = make_grid(2, 3.0, 16).unwrap();
        let f = WaveField::from_fn(g, 0.0, |_| C64::new(1.0, 0.0)).unwrap();
        for comp in spectral_gradient(&f).unwrap() {
            assert!(comp.values().iter().all(|v| v.norm() < 1e-14));
        }
    }

    #[test]
    fn gradient_of_single_mode() {
        let g = make_grid(1, PI, 32).unwrap();
        let f = WaveField::from_fn(g.clone(), 0.0, |x| C64::from_polar(1.0, 3.0 * x[0])).unwrap();
        let d = spectral_gradient(&f).unwrap();
        for i in 0..g.len() {
            let expect = C64::new(0.0, 3.0) * f.values()[i];
            assert!((d[0].values()[i] - expect).norm() <= 1e-12);
        }
    }

    #[test]
    fn two_dimensional_gradient_axes() {
        let g = make_grid(2, PI, 16).unwrap();
        let f = WaveField::from_fn(g.clone(), 0.0, |x| C64::new((2.0 * x[0]).sin() * x[1].cos(), 0.0)).unwrap();
        let d = spectral_gradient(&f).unwrap();
        for i in 0..g.len() {
            let [x, y] = g.point(i);
            assert!((d[0].values()[i].re - 2.0 * (2.0 * x).cos() * y.cos()).abs() < 1e-12);
            assert!((d[1].values()[i].re + (2.0 * x).sin() * y.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_box_and_gaussian() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let one = WaveField::from_fn(g.clone(), 0.0, |_| C64::new(1.0, 0.0)).unwrap();
        let m = quadrature(&one, |_| true, Integrand::Mass).unwrap();
        assert!((m.re - 32.0).abs() < 1e-12);
        let gauss = WaveField::from_fn(g.clone(), 0.0, |x| C64::new((-x[0] * x[0]).exp(), 0.0)).unwrap();
        let m = quadrature(&gauss, |_| true, Integrand::Mass).unwrap();
        assert!((m.re - (PI / 2.0).sqrt()).abs() < 1e-12);
        assert!((m.re - 1.2533141).abs() < 1e-7);
        let empty = quadrature(&gauss, |_| false, Integrand::Mass).unwrap();
        assert_eq!(empty, C64::new(0.0, 0.0));
    }

    #[test]
    fn quadrature_is_additive_over_disjoint_regions() {
        let g = make_grid(1, 8.0, 128).unwrap();
        let f = WaveField::from_fn(g, 0.0, |x| C64::new((-x[0] * x[0] / 3.0).exp(), x[0].sin())).unwrap();
        let all = quadrature(&f, |_| true, Integrand::Mass).unwrap().re;
        let left = quadrature(&f, |x| x[0] < 0.7, Integrand::Mass).unwrap().re;
        let right = quadrature(&f, |x| x[0] >= 0.7, Integrand::Mass).unwrap().re;
        // both halves are pairwise sums over masked copies of the same array
        assert!((left + right - all).abs() <= 1e-15 * all);
    }

    #[test]
    fn inner_product_with_itself_is_mass() {
        let g = make_grid(2, 4.0, 32).unwrap();
        let f = WaveField::from_fn(g, 0.0, |x| C64::new((-x[0] * x[0] - x[1] * x[1]).exp(), 0.3 * x[1])).unwrap();
        let ip = quadrature(&f, |x| x[0] > 0.0, Integrand::Inner(&f)).unwrap();
        let m = quadrature(&f, |x| x[0] > 0.0, Integrand::Mass).unwrap();
        assert!((ip - m).norm() < 1e-14);
    }

    #[test]
    fn trajectory_rejects_bad_step() {
        let g = make_grid(1, 4.0, 16).unwrap();
        assert!(Trajectory::new(g.clone(), 0.0, 0.0, vec![vec![C64::new(0.0, 0.0); 16]]).is_err());
        let t = Trajectory::new(g, 0.0, 0.5, vec![vec![C64::new(0.0, 0.0); 16]; 3]).unwrap();
        assert_eq!(t.t_end(), 1.0);
        assert!(t.covers(0.0, 1.0));
        assert!(!t.covers(0.0, 1.1));
    }

    #[test]
    fn nonfinite_field_rejected() {
        let g = make_grid(1, 4.0, 16).unwrap();
        let mut v = vec![C64::new(0.0, 0.0); 16];
        v[3] = C64::new(f64::NAN, 0.0);
        assert!(matches!(WaveField::new(g, v, 0.0), Err(Error::NonFinite(_))));
    }
}
