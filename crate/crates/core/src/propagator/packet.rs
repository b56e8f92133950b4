use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, Trajectory, WaveField};
use crate::C64;

/// Gaussian wave packet `exp(-|x - c|^2 / (4 w^2)) exp(i p . x)` together with
/// its exact free evolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianPacket {
    pub center: [f64; 2],
    pub width: f64,
    pub momentum: [f64; 2],
    pub amplitude: f64,
}

impl GaussianPacket {
    pub fn new(center: [f64; 2], width: f64, momentum: [f64; 2]) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::Domain(format!("packet width must be positive, got {width}")));
        }
        Ok(GaussianPacket { center, width, momentum, amplitude: 1.0 })
    }

    /// Centered, unit-width, at rest: `exp(-|x|^2 / 4)`.
    pub fn standard() -> Self {
        GaussianPacket { center: [0.0; 2], width: 1.0, momentum: [0.0; 2], amplitude: 1.0 }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// Free solution of `u_t = i Lap u` at `(x, t)`.
    pub fn eval(&self, x: &[f64], t: f64) -> C64 {
        let a = self.width * self.width;
        let z = C64::new(a, t);
        let mut r2 = 0.0;
        let mut phase = 0.0;
        let mut p2 = 0.0;
        for (j, xj) in x.iter().enumerate() {
            let y = xj - self.center[j] - 2.0 * self.momentum[j] * t;
            r2 += y * y;
            phase += self.momentum[j] * xj;
            p2 += self.momentum[j] * self.momentum[j];
        }
        let pref = (C64::new(a, 0.0) / z).powf(x.len() as f64 / 2.0);
        pref * (-r2 / (4.0 * z)).exp() * C64::from_polar(self.amplitude, phase - p2 * t)
    }

    pub fn field(&self, grid: &Arc<Grid>, t: f64) -> Result<WaveField> {
        WaveField::from_fn(grid.clone(), t, |x| self.eval(x, t))
    }

    /// Exact free trajectory at `t0 + k dt`, `k < len`.
    pub fn trajectory(&self, grid: &Arc<Grid>, t0: f64, dt: f64, len: usize) -> Result<Trajectory> {
        let dim = grid.dim();
        let slices = (0..len)
            .map(|k| {
                let t = t0 + k as f64 * dt;
                (0..grid.len()).map(|i| self.eval(&grid.point(i)[..dim], t)).collect()
            })
            .collect();
        Trajectory::new(grid.clone(), t0, dt, slices)
    }
}
