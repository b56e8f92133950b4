//! Mass-flux bookkeeping and the quantities of the lower-bound argument.
//!
//! For `u_t = i (Lap u + V u)` the density obeys
//! `d/dt |u|^2 = 2 Im div(u grad conj(u)) - 2 Im(V) |u|^2`.
//! The often-quoted form `-2 Im(div(u grad conj(u)) + V |u|^2)` flips the sign
//! of the divergence term; both are evaluated so that the discrepancy is
//! visible in the data rather than assumed.

mod chain;

pub use chain::{admissible_gamma, proof_chain_diagnostics, ChainBound, ProofChainReport, MIN_CHAIN_SLICES};

use crate::carleman::CutoffSet;
use crate::error::{Error, Result};
use crate::grid::{Grid, Trajectory};
use crate::propagator::PotentialSpec;
use crate::sum::pairwise_by;
use crate::C64;

/// How the identity is tested in space.
#[derive(Clone, Debug, PartialEq)]
pub enum MassWeight {
    /// `L^1` norm over the box of the pointwise defect.
    Pointwise,
    /// Defect of the box integrals; the divergence integrates to zero.
    WholeBox,
    /// Integrals against `theta_R(|x|)^2`, divergence moved onto the weight.
    Radial(CutoffSet),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MassIdentityReport {
    pub t: f64,
    /// Defect with the derived sign.
    pub residual: f64,
    /// Defect with the stated sign.
    pub residual_stated: f64,
    /// Size of `|u(t)|^2 - |u(0)|^2` in the same norm.
    pub change: f64,
    /// Size of `2 int_0^t Im div(u grad conj(u))` in the same norm.
    pub flux: f64,
}

/// Fourth-order weights on `n + 1` equispaced samples: composite Simpson, with
/// a closing three-eighths panel when `n` is odd.
fn time_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    match n {
        0 => {}
        1 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        _ => {
            let simpson = if n.is_multiple_of(2) { n } else { n - 3 };
            for j in (0..simpson).step_by(2) {
                w[j] += h / 3.0;
                w[j + 1] += 4.0 * h / 3.0;
                w[j + 2] += h / 3.0;
            }
            if n % 2 == 1 {
                let j = simpson;
                for (o, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
                    w[j + o] += 3.0 * h / 8.0 * c;
                }
            }
        }
    }
    w
}

/// Pointwise `Im div(u grad conj(u))`, spectrally.
pub fn flux_divergence(grid: &Grid, u: &[C64]) -> Vec<f64> {
    let conj: Vec<C64> = u.iter().map(|v| v.conj()).collect();
    let mut out = vec![0.0; u.len()];
    for axis in 0..grid.dim() {
        let d = grid.derivative(&conj, axis);
        let q: Vec<C64> = u.iter().zip(&d).map(|(a, b)| a * b).collect();
        for (o, v) in out.iter_mut().zip(grid.derivative(&q, axis)) {
            *o += v.im;
        }
    }
    out
}

/// `(x / |x|) . u grad conj(u)`, zero at the origin.
pub(crate) fn radial_current(grid: &Grid, u: &[C64], grad: &[Vec<C64>]) -> Vec<C64> {
    let dim = grid.dim();
    (0..u.len())
        .map(|i| {
            let r = grid.radius(i);
            if r == 0.0 {
                return C64::new(0.0, 0.0);
            }
            let p = grid.point(i);
            let mut acc = C64::new(0.0, 0.0);
            for (axis, g) in grad.iter().enumerate().take(dim) {
                acc += g[i].conj() * (p[axis] / r);
            }
            u[i] * acc
        })
        .collect()
}

fn stored_index(traj: &Trajectory, t: f64) -> Result<usize> {
    let x = (t - traj.t_start()) / traj.dt();
    let k = x.round();
    if !(k >= 0.0) || (k as usize) >= traj.len() {
        return Err(Error::Coverage(format!("t = {t} outside [{}, {}]", traj.t_start(), traj.t_end())));
    }
    if (x - k).abs() > 1e-9 {
        return Err(Error::Domain(format!("t = {t} is not a stored time")));
    }
    Ok(k as usize)
}

/// Defect of the integrated mass identity between the first slice and `t`.
///
/// The time integral uses fourth-order weights on the stored slices, so for
/// a solver of order two the defect is dominated by the solver error.
pub fn mass_identity_residual(traj: &Trajectory, v: &PotentialSpec, weight: &MassWeight, t: f64) -> Result<MassIdentityReport> {
    let grid = traj.grid();
    let n = stored_index(traj, t)?;
    let weights = time_weights(n, traj.dt());
    let m = grid.len();
    let vol = grid.cell_volume();

    // theta^2 and the radial derivative of theta^2 for the radial mode
    let radial = match weight {
        MassWeight::Radial(cut) => {
            let reach = cut.r() + 1.0;
            if reach + 3.0 * grid.spacing() > grid.half_width() {
                return Err(Error::Domain(format!(
                    "weight support radius {reach} leaves the box of half width {}",
                    grid.half_width()
                )));
            }
            let th: Vec<f64> = (0..m).map(|i| cut.theta(grid.radius(i))).collect();
            let dth: Vec<f64> = (0..m).map(|i| 2.0 * th[i] * cut.theta_prime(grid.radius(i))).collect();
            Some((th.iter().map(|x| x * x).collect::<Vec<f64>>(), dth))
        }
        _ => None,
    };

    let mut flux_acc = vec![0.0; m];
    let mut pot_acc = vec![0.0; m];
    let mut vbuf = vec![C64::new(0.0, 0.0); m];
    for (k, wk) in weights.iter().enumerate() {
        let f = traj.field(k);
        let u = f.values();
        v.sample(grid, traj.time(k), &mut vbuf);
        match &radial {
            Some((_, dth)) => {
                // int theta^2 div(P) = - int d(theta^2)/dr (x/|x|) . P
                let grad = grid.gradient(u);
                let cur = radial_current(grid, u, &grad);
                for i in 0..m {
                    flux_acc[i] -= wk * dth[i] * cur[i].im;
                }
            }
            None => {
                let div = flux_divergence(grid, u);
                for i in 0..m {
                    flux_acc[i] += wk * div[i];
                }
            }
        }
        for i in 0..m {
            pot_acc[i] += wk * vbuf[i].im * u[i].norm_sqr();
        }
    }
    let u0 = traj.field(0).values();
    let ut = traj.field(n).values();
    let change: Vec<f64> = (0..m).map(|i| ut[i].norm_sqr() - u0[i].norm_sqr()).collect();
    let defect = |sign: f64, i: usize| change[i] - (2.0 * sign * flux_acc[i] - 2.0 * pot_acc[i]);

    let (residual, residual_stated, change_size, flux_size) = match &radial {
        None if *weight == MassWeight::Pointwise => (
            vol * pairwise_by(m, |i| defect(1.0, i).abs()),
            vol * pairwise_by(m, |i| defect(-1.0, i).abs()),
            vol * pairwise_by(m, |i| change[i].abs()),
            vol * pairwise_by(m, |i| 2.0 * flux_acc[i].abs()),
        ),
        None => (
            (vol * pairwise_by(m, |i| defect(1.0, i))).abs(),
            (vol * pairwise_by(m, |i| defect(-1.0, i))).abs(),
            (vol * pairwise_by(m, |i| change[i])).abs(),
            (vol * pairwise_by(m, |i| 2.0 * flux_acc[i])).abs(),
        ),
        Some((th2, _)) => {
            // the flux accumulator already carries the weight
            let ch = vol * pairwise_by(m, |i| th2[i] * change[i]);
            let fl = vol * pairwise_by(m, |i| flux_acc[i]);
            let po = vol * pairwise_by(m, |i| th2[i] * pot_acc[i]);
            ((ch - 2.0 * fl + 2.0 * po).abs(), (ch + 2.0 * fl + 2.0 * po).abs(), ch.abs(), 2.0 * fl.abs())
        }
    };
    Ok(MassIdentityReport { t, residual, residual_stated, change: change_size, flux: flux_size })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn time_weights_are_fourth_order() {
        for n in [2usize, 3, 5, 8] {
            let h = 1.0 / n as f64;
            let w = time_weights(n, h);
            let q = |f: &dyn Fn(f64) -> f64| w.iter().enumerate().map(|(j, wj)| wj * f(j as f64 * h)).sum::<f64>();
            assert!((q(&|x| x.powi(3)) - 0.25).abs() < 1e-14, "n = {n}");
            assert!((q(&|_| 1.0) - 1.0).abs() < 1e-14);
        }
        assert_eq!(time_weights(1, 2.0), vec![1.0, 1.0]);
        assert!(time_weights(0, 1.0).iter().all(|w| *w == 0.0));
    }

    #[test]
    fn flux_of_plane_wave_vanishes_and_matches_laplacian_form() {
        let g = make_grid(1, std::f64::consts::PI, 64).unwrap();
        let u: Vec<C64> = (0..64)
            .map(|i| {
                let x = g.coord(i);
                C64::from_polar(1.0 + 0.3 * x.cos(), 2.0 * x + 0.5 * (2.0 * x).sin())
            })
            .collect();
        let div = flux_divergence(&g, &u);
        // Im div(u grad conj u) = Im(u Lap conj u)
        let conj: Vec<C64> = u.iter().map(|v| v.conj()).collect();
        let lap = g.laplacian(&conj);
        for i in 0..64 {
            assert!((div[i] - (u[i] * lap[i]).im).abs() < 1e-9);
        }
        let pw: Vec<C64> = (0..64).map(|i| C64::from_polar(1.0, 3.0 * g.coord(i))).collect();
        assert!(flux_divergence(&g, &pw).iter().all(|d| d.abs() < 1e-10));
    }

    #[test]
    fn non_stored_time_is_rejected() {
        let g = make_grid(1, 4.0, 32).unwrap();
        let traj = Trajectory::new(g, 0.0, 0.1, vec![vec![C64::new(1.0, 0.0); 32]; 4]).unwrap();
        let z = PotentialSpec::zero();
        assert!(matches!(mass_identity_residual(&traj, &z, &MassWeight::WholeBox, 0.15), Err(Error::Domain(_))));
        assert!(matches!(mass_identity_residual(&traj, &z, &MassWeight::WholeBox, 0.5), Err(Error::Coverage(_))));
        let r = mass_identity_residual(&traj, &z, &MassWeight::Pointwise, 0.3).unwrap();
        assert_eq!(r.residual, 0.0);
    }
}
