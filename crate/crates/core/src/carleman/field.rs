use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, Trajectory};
use crate::sum::{pairwise_by, pairwise_by_c};
use crate::C64;

/// Zero slices required at each end of a compactly supported field, so that
/// two applications of the five-point time stencil see no truncation.
pub const TIME_MARGIN: usize = 2;
/// Zero cells required next to the spatial boundary.
pub const EDGE_MARGIN: usize = 3;

/// Complex values on a uniform space-time grid `t0 + k dt`, `k < len`.
///
/// Outside the stored slices the field is taken to be zero.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    grid: Arc<Grid>,
    t0: f64,
    dt: f64,
    slices: Vec<Vec<C64>>,
    compact: bool,
}

impl SpaceTimeField {
    pub fn new(grid: Arc<Grid>, t0: f64, dt: f64, slices: Vec<Vec<C64>>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        if slices.len() < 2 * TIME_MARGIN + 1 {
            return Err(Error::Domain(format!("need at least {} time slices", 2 * TIME_MARGIN + 1)));
        }
        for (k, s) in slices.iter().enumerate() {
            if s.len() != grid.len() {
                return Err(Error::Mismatch(format!("slice {k} has {} values, grid has {}", s.len(), grid.len())));
            }
            if s.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::NonFinite(format!("slice {k}")));
            }
        }
        Ok(SpaceTimeField { grid, t0, dt, slices, compact: false })
    }

    /// Builds a field and certifies compact support: the first and last
    /// [`TIME_MARGIN`] slices and the [`EDGE_MARGIN`] boundary cells vanish.
    pub fn compact(grid: Arc<Grid>, t0: f64, dt: f64, slices: Vec<Vec<C64>>) -> Result<Self> {
        let mut f = Self::new(grid, t0, dt, slices)?;
        f.certify()?;
        Ok(f)
    }

    /// Samples `f(x, t)` on the grid at `t0 + k dt`, `k < len`.
    pub fn from_fn<F: Fn(&[f64], f64) -> C64>(grid: Arc<Grid>, t0: f64, dt: f64, len: usize, f: F) -> Result<Self> {
        let dim = grid.dim();
        let slices = (0..len)
            .map(|k| {
                let t = t0 + k as f64 * dt;
                (0..grid.len()).map(|i| f(&grid.point(i)[..dim], t)).collect()
            })
            .collect();
        Self::new(grid, t0, dt, slices)
    }

    pub fn from_trajectory(traj: &Trajectory) -> Result<Self> {
        let slices = traj.fields().iter().map(|f| f.values().to_vec()).collect();
        Self::new(traj.grid().clone(), traj.t_start(), traj.dt(), slices)
    }

    fn certify(&mut self) -> Result<()> {
        let n = self.slices.len();
        for k in (0..TIME_MARGIN).chain(n - TIME_MARGIN..n) {
            if self.slices[k].iter().any(|v| *v != C64::new(0.0, 0.0)) {
                return Err(Error::Support(format!("slice {k} must vanish for compact support")));
            }
        }
        for (k, s) in self.slices.iter().enumerate() {
            for (i, v) in s.iter().enumerate() {
                if *v != C64::new(0.0, 0.0) && self.grid.edge_distance_cells(i) < EDGE_MARGIN {
                    return Err(Error::Support(format!("slice {k} is nonzero within {EDGE_MARGIN} cells of the boundary")));
                }
            }
        }
        self.compact = true;
        Ok(())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn slice(&self, k: usize) -> &[C64] {
        &self.slices[k]
    }

    pub fn slices(&self) -> &[Vec<C64>] {
        &self.slices
    }

    pub fn is_compact(&self) -> bool {
        self.compact
    }

    pub fn is_zero(&self) -> bool {
        self.slices.iter().all(|s| s.iter().all(|v| *v == C64::new(0.0, 0.0)))
    }

    /// Same grid and times, new values; the compact flag is not carried over.
    pub(crate) fn with_slices(&self, slices: Vec<Vec<C64>>) -> SpaceTimeField {
        SpaceTimeField { grid: self.grid.clone(), t0: self.t0, dt: self.dt, slices, compact: false }
    }

    /// Pointwise transform `(x, t, f) -> value`; keeps the compact flag.
    pub fn map<F: Fn(&[f64], f64, C64) -> C64 + Sync>(&self, f: F) -> SpaceTimeField {
        let dim = self.grid.dim();
        let slices = self
            .slices
            .par_iter()
            .enumerate()
            .map(|(k, s)| {
                let t = self.time(k);
                s.iter().enumerate().map(|(i, v)| f(&self.grid.point(i)[..dim], t, *v)).collect()
            })
            .collect();
        let mut out = self.with_slices(slices);
        out.compact = self.compact;
        out
    }

    pub fn add(&self, other: &SpaceTimeField, scale: C64) -> Result<SpaceTimeField> {
        self.check_layout(other)?;
        let slices = self
            .slices
            .par_iter()
            .zip(&other.slices)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + scale * y).collect())
            .collect();
        Ok(self.with_slices(slices))
    }

    fn check_layout(&self, other: &SpaceTimeField) -> Result<()> {
        if self.grid.as_ref() != other.grid.as_ref() || self.slices.len() != other.slices.len() || self.dt != other.dt {
            return Err(Error::Mismatch("space-time fields on different grids".into()));
        }
        Ok(())
    }

    /// Fourth-order centered time derivative with zero extension beyond the
    /// stored slices. The stencil matrix is exactly antisymmetric.
    pub fn time_derivative(&self) -> SpaceTimeField {
        let n = self.slices.len();
        let m = self.grid.len();
        let zero = C64::new(0.0, 0.0);
        let at = |k: isize, i: usize| if k < 0 || k >= n as isize { zero } else { self.slices[k as usize][i] };
        let inv = 1.0 / (12.0 * self.dt);
        let slices = (0..n as isize)
            .into_par_iter()
            .map(|k| {
                (0..m)
                    .map(|i| (at(k - 2, i) - at(k - 1, i) * 8.0 + at(k + 1, i) * 8.0 - at(k + 2, i)) * inv)
                    .collect()
            })
            .collect();
        self.with_slices(slices)
    }

    pub fn laplacian(&self) -> SpaceTimeField {
        self.with_slices(self.slices.par_iter().map(|s| self.grid.laplacian(s)).collect())
    }

    pub fn derivative(&self, axis: usize) -> SpaceTimeField {
        self.with_slices(self.slices.par_iter().map(|s| self.grid.derivative(s, axis)).collect())
    }

    /// Points within `reach` slices of a nonzero value at the same `x`.
    pub fn support_mask(&self, reach: usize) -> Vec<Vec<bool>> {
        let n = self.slices.len();
        let m = self.grid.len();
        let mut mask = vec![vec![false; m]; n];
        for (k, s) in self.slices.iter().enumerate() {
            for (i, v) in s.iter().enumerate() {
                if *v != C64::new(0.0, 0.0) {
                    for row in mask.iter_mut().take((k + reach + 1).min(n)).skip(k.saturating_sub(reach)) {
                        row[i] = true;
                    }
                }
            }
        }
        mask
    }

    /// `L^2` norm over the points where `mask` holds.
    pub fn masked_norm(&self, mask: &[Vec<bool>]) -> f64 {
        let m = self.grid.len();
        let total = pairwise_by(self.slices.len() * m, |j| {
            let (k, i) = (j / m, j % m);
            if mask[k][i] {
                self.slices[k][i].norm_sqr()
            } else {
                0.0
            }
        });
        (total * self.grid.cell_volume() * self.dt).sqrt()
    }

    /// Space-time inner product `int int f conj(h)`.
    pub fn inner(&self, other: &SpaceTimeField) -> Result<C64> {
        self.check_layout(other)?;
        let m = self.grid.len();
        let total = pairwise_by_c(self.slices.len() * m, |j| {
            let (k, i) = (j / m, j % m);
            self.slices[k][i] * other.slices[k][i].conj()
        });
        Ok(total * self.grid.cell_volume() * self.dt)
    }

    pub fn norm(&self) -> f64 {
        let m = self.grid.len();
        let total = pairwise_by(self.slices.len() * m, |j| self.slices[j / m][j % m].norm_sqr());
        (total * self.grid.cell_volume() * self.dt).sqrt()
    }

    /// `log || exp(log_weight) f ||_2`, restricted to points where `mask` holds.
    /// Uses a max-shift so that weights far beyond `f64` range stay exact.
    /// Returns `-inf` for a field that vanishes on the mask.
    pub fn log_weighted_norm<W, M>(&self, log_weight: W, mask: M) -> f64
    where
        W: Fn(usize, usize) -> f64,
        M: Fn(usize, usize) -> bool,
    {
        let m = self.grid.len();
        let n = self.slices.len() * m;
        let active = |j: usize| {
            let (k, i) = (j / m, j % m);
            mask(k, i) && self.slices[k][i] != C64::new(0.0, 0.0)
        };
        let shift = (0..n).filter(|&j| active(j)).map(|j| log_weight(j / m, j % m)).fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let total = pairwise_by(n, |j| {
            if !active(j) {
                return 0.0;
            }
            let (k, i) = (j / m, j % m);
            (2.0 * (log_weight(k, i) - shift)).exp() * self.slices[k][i].norm_sqr()
        });
        if total == 0.0 {
            return f64::NEG_INFINITY;
        }
        shift + 0.5 * (total * self.grid.cell_volume() * self.dt).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn bump(t: f64) -> f64 {
        if t <= 0.0 || t >= 1.0 {
            0.0
        } else {
            (-1.0 / (t * (1.0 - t))).exp()
        }
    }

    #[test]
    fn time_derivative_fourth_order() {
        let g = make_grid(1, 4.0, 16).unwrap();
        let err = |n: usize| {
            let dt = 1.0 / n as f64;
            let f = SpaceTimeField::from_fn(g.clone(), 0.0, dt, n + 1, |_, t| C64::new(bump(t), 0.0)).unwrap();
            let d = f.time_derivative();
            (0..=n)
                .map(|k| {
                    let t = k as f64 * dt;
                    let h = 1e-6;
                    let exact = (bump(t + h) - bump(t - h)) / (2.0 * h);
                    (d.slice(k)[0].re - exact).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(100) / err(200);
        assert!(ratio > 12.0, "{ratio}");
    }

    #[test]
    fn time_derivative_is_antisymmetric() {
        let g = make_grid(1, 4.0, 16).unwrap();
        let f = SpaceTimeField::from_fn(g.clone(), 0.0, 0.1, 9, |x, t| C64::new(x[0] * t, t * t - x[0])).unwrap();
        let h = SpaceTimeField::from_fn(g, 0.0, 0.1, 9, |x, t| C64::new((x[0] + t).sin(), t.cos())).unwrap();
        let a = f.time_derivative().inner(&h).unwrap();
        let b = f.inner(&h.time_derivative()).unwrap();
        assert!((a + b).norm() < 1e-12 * a.norm().max(1.0));
    }

    #[test]
    fn compact_certificate() {
        let g = make_grid(1, 4.0, 32).unwrap();
        let ok = SpaceTimeField::compact(g.clone(), 0.0, 0.1, vec![vec![C64::new(0.0, 0.0); 32]; 6]);
        assert!(ok.unwrap().is_compact());
        let mut s = vec![vec![C64::new(0.0, 0.0); 32]; 6];
        s[1][16] = C64::new(1.0, 0.0);
        assert!(matches!(SpaceTimeField::compact(g.clone(), 0.0, 0.1, s), Err(Error::Support(_))));
        let mut s = vec![vec![C64::new(0.0, 0.0); 32]; 6];
        s[3][1] = C64::new(1.0, 0.0);
        assert!(matches!(SpaceTimeField::compact(g, 0.0, 0.1, s), Err(Error::Support(_))));
    }

    #[test]
    fn log_weighted_norm_handles_huge_weights() {
        let g = make_grid(1, 4.0, 32).unwrap();
        let f = SpaceTimeField::from_fn(g, 0.0, 0.25, 5, |_, _| C64::new(1.0, 0.0)).unwrap();
        let plain = f.norm().ln();
        let shifted = f.log_weighted_norm(|_, _| 2000.0, |_, _| true);
        assert!((shifted - 2000.0 - plain).abs() < 1e-12);
        assert_eq!(f.log_weighted_norm(|_, _| 0.0, |_, _| false), f64::NEG_INFINITY);
    }
}
