//! Quantities of the lower-bound argument, evaluated on a stored solution.
//!
//! With `R = R0 sqrt(gamma)`, `alpha = alpha(t(s))` and the two windows
//! `I1 = s([3/8, 5/8])`, `I2 = s([1/4, 3/4])`:
//!
//! - `B`  : `|int_{I1} int theta_R^2(|y|/alpha) (|u|^2 - |u0|^2)|`, via the mass identity,
//! - `B1` : `|4 Im int_{I1} int_0^s alpha^{-1} int theta theta'(|y|/alpha) (y/|y|) . u grad conj(u)|`,
//! - `B2` : `|2 Im int_{I1} int_0^s int theta^2 V |u|^2|`,
//! - `I11`, `I12`, `I2`: the `v` and `grad v` integrals over `t in [1/4, 3/4]`,
//!   computed in the original variables through `y = alpha x`, `t = t(s)`.

use super::radial_current;
use crate::appell::ScalarFns;
use crate::carleman::CutoffSet;
use crate::error::{Error, Result};
use crate::grid::Trajectory;
use crate::interp::{slices_within, trapezoid_nodes};
use crate::observability::region::{cell_weights, Shell};
use crate::observability::ScenarioConstants;
use crate::propagator::PotentialSpec;
use crate::sum::pairwise_by;
use crate::C64;

/// Smallest `gamma` the argument admits:
/// `max(c0 L / (256 A), 2^14 (A / c0)^4, 1 / R0^2, L^2)`; `None` when `c0 = 0`.
pub fn admissible_gamma(constants: &ScenarioConstants) -> Option<f64> {
    let ScenarioConstants { c0, r0, a, l, .. } = *constants;
    if constants.is_degenerate() {
        return None;
    }
    Some((c0 * l / (256.0 * a)).max(16384.0 * (a / c0).powi(4)).max(1.0 / (r0 * r0)).max(l * l))
}

/// Fewest stored slices inside each of the two windows.
pub const MIN_CHAIN_SLICES: usize = 16;

/// `value <= rhs`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainBound {
    pub value: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl ChainBound {
    fn new(value: f64, rhs: f64) -> Self {
        ChainBound { value, rhs, pass: value <= rhs }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProofChainReport {
    pub gamma: f64,
    pub r0: f64,
    pub r: f64,
    pub l: f64,
    pub a: f64,
    pub c_n: f64,
    /// `64 c_n R^2`
    pub sigma: f64,
    /// `B` through the identity with the derived flux sign; `B <= B1 + B2`.
    pub b: f64,
    /// Same with the stated flux sign.
    pub b_stated: f64,
    /// `B` evaluated directly against the `theta^2` weight.
    pub b_weighted: f64,
    /// `B` over the ball `|y| <= alpha R`, where `theta = 1`.
    pub b_ball: f64,
    pub b1: f64,
    pub b2: f64,
    pub i11: f64,
    pub i12: f64,
    pub i1: f64,
    pub i2: f64,
    /// `B1 <= 8 A^2 / gamma^{3/2}`
    pub bound_b1: ChainBound,
    /// `B2 <= 8 A^2 L / gamma^2`
    pub bound_b2: ChainBound,
    /// `gamma B <= 16 A^2 / sqrt(gamma)`
    pub bound_gamma_b: ChainBound,
    /// `I1 <= 216 A^2`
    pub bound_i1: ChainBound,
    /// `I2 <= 32 gamma^2 R0^2 int_{I2} int_{alpha R <= |y| <= alpha (R+1)} |u|^2 + |grad u|^2 / gamma`
    pub bound_i2: ChainBound,
    /// `c0^2 / 4 <= gamma int_{I1} int_{|y| <= alpha R} |u0|^2`; absent when `c0 = 0`.
    pub floor: Option<ChainBound>,
    /// `A` measured over `|y| <= 4 R / sqrt(gamma)` for `s` up to the end of `I1`.
    pub a_local: f64,
    pub b1_rhs_local: f64,
    pub b2_rhs_local: f64,
    /// `sigma^{3/2} / (c_n R^2) >= 2 L / gamma`
    pub condition_2: bool,
    /// `sigma^{3/2} / (c_n R^2) >= 512 A / c0`
    pub condition_3: bool,
    /// Logarithms of the two sides of the combined inequality.
    pub condition_4_log_lhs: f64,
    pub condition_4_log_rhs: f64,
    pub condition_4: bool,
    /// Largest relative change of the reported integrals when every other
    /// stored slice is dropped.
    pub resolution_drift: f64,
}

struct SliceData {
    dens: Vec<f64>,
    grad_sq: Vec<f64>,
    grad: Vec<Vec<C64>>,
    current: Vec<C64>,
    vu2: Vec<C64>,
}

#[derive(Clone, Debug, Default)]
struct Quantities {
    b: f64,
    b_stated: f64,
    b_weighted: f64,
    b_ball: f64,
    b1: f64,
    b2: f64,
    i11: f64,
    i12: f64,
    i2: f64,
    i2_shell: f64,
    floor: f64,
    a_local_sq: f64,
    band: f64,
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

fn measure(traj: &Trajectory, v: &PotentialSpec, fns: ScalarFns, cut: &CutoffSet, r0: f64) -> Result<Quantities> {
    let grid = traj.grid();
    let m = grid.len();
    let dim = grid.dim();
    let vol = grid.cell_volume();
    let gamma = fns.gamma();
    let r = cut.r();
    let (s1a, s1b) = fns.interval_1();
    let (s2a, s2b) = fns.interval_2();

    let last = (((s2b - traj.t_start()) / traj.dt()).ceil() as usize + 1).min(traj.len() - 1);
    let mut vbuf = vec![C64::new(0.0, 0.0); m];
    let data: Vec<SliceData> = (0..=last)
        .map(|k| {
            let u = traj.field(k).values();
            let grad = grid.gradient(u);
            let grad_sq = (0..m).map(|i| grad.iter().map(|g| g[i].norm_sqr()).sum()).collect();
            let current = radial_current(grid, u, &grad);
            v.sample(grid, traj.time(k), &mut vbuf);
            let vu2 = (0..m).map(|i| vbuf[i] * u[i].norm_sqr()).collect();
            SliceData { dens: u.iter().map(|z| z.norm_sqr()).collect(), grad_sq, grad, current, vu2 }
        })
        .collect();
    let dot = |w: &[f64], f: &[f64]| vol * pairwise_by(m, |i| w[i] * f[i]);
    let dot_c = |w: &[f64], f: &[C64]| {
        C64::new(vol * pairwise_by(m, |i| w[i] * f[i].re), vol * pairwise_by(m, |i| w[i] * f[i].im))
    };
    let alpha_at = |s: f64| fns.alpha(fns.t(s));
    let mut q = Quantities::default();

    // B, B1, B2 and the floor over I1
    let (mut x_div, mut x_v) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let (mut weighted, mut ball) = (0.0, 0.0);
    let d0 = &data[0].dens;
    for node in trapezoid_nodes(traj, s1a, s1b)? {
        let alpha = alpha_at(node.s);
        let th: Vec<f64> = (0..m).map(|i| cut.theta(grid.radius(i) / alpha)).collect();
        let th2: Vec<f64> = th.iter().map(|x| x * x).collect();
        // grad theta^2(|y| / alpha) = (2 / alpha) theta theta' y / |y|
        let dth2: Vec<f64> = (0..m).map(|i| 2.0 / alpha * th[i] * cut.theta_prime(grid.radius(i) / alpha)).collect();
        let inside = cell_weights(grid, Shell::ball(alpha * r))?;
        for &(k, lambda) in &node.slices {
            let change: Vec<f64> = (0..m).map(|i| data[k].dens[i] - d0[i]).collect();
            weighted += node.weight * lambda * dot(&th2, &change);
            ball += node.weight * lambda * dot(&inside, &change);
        }
        q.floor += node.weight * dot(&inside, d0);
        let (mut div_in, mut v_in) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for inner in trapezoid_nodes(traj, traj.t_start(), node.s)? {
            for &(k, lambda) in &inner.slices {
                // int theta^2 div(P) = - int grad(theta^2) . P
                div_in -= dot_c(&dth2, &data[k].current) * (inner.weight * lambda);
                v_in += dot_c(&th2, &data[k].vu2) * (inner.weight * lambda);
            }
        }
        x_div += div_in * node.weight;
        x_v += v_in * node.weight;
    }
    q.floor *= gamma;
    q.b1 = (2.0 * x_div.im).abs();
    q.b2 = (2.0 * x_v.im).abs();
    q.b = (2.0 * x_div.im - 2.0 * x_v.im).abs();
    q.b_stated = (2.0 * x_div.im + 2.0 * x_v.im).abs();
    q.b_weighted = weighted.abs();
    q.b_ball = ball.abs();

    let local = cell_weights(grid, Shell::ball(4.0 * r / gamma.sqrt()))?;
    let end1 = ((s1b - traj.t_start()) / traj.dt()).ceil() as usize;
    for d in data.iter().take(end1.min(last) + 1) {
        let total: Vec<f64> = (0..m).map(|i| d.dens[i] + d.grad_sq[i]).collect();
        q.a_local_sq = q.a_local_sq.max(dot(&local, &total));
    }

    // I11, I12, I2 and the band integral over I2
    for node in trapezoid_nodes(traj, s2a, s2b)? {
        let t = fns.t(node.s);
        let alpha = fns.alpha(t);
        let beta = fns.beta(t);
        let jac = fns.dt_ds(node.s);
        let disc = cell_weights(grid, Shell::ball(alpha * (r + 1.0)))?;
        let shell = cell_weights(grid, Shell { inner: alpha * r, outer: alpha * (r + 1.0), periodic: false })?;
        let band = cell_weights(grid, Shell::band(r0 * (1.0 + node.s * gamma), 4.0 * r0 / gamma.sqrt(), false))?;
        for &(k, lambda) in &node.slices {
            let d = &data[k];
            let u = traj.field(k).values();
            // |alpha grad u - (i/2)(beta/alpha) y u|^2, the pulled-back |grad v|^2
            let gv: Vec<f64> = (0..m)
                .map(|i| {
                    let p = grid.point(i);
                    (0..dim)
                        .map(|ax| (d.grad[ax][i] * alpha - C64::new(0.0, 0.5 * beta / alpha * p[ax]) * u[i]).norm_sqr())
                        .sum()
                })
                .collect();
            let w = node.weight * lambda;
            q.i11 += w * jac * dot(&disc, &d.dens);
            q.i12 += w * jac * 4.0 / (r * r) * dot(&disc, &gv);
            let mix: Vec<f64> = (0..m).map(|i| d.dens[i] + gv[i]).collect();
            q.i2 += w * jac * dot(&shell, &mix);
            let soft: Vec<f64> = (0..m).map(|i| d.dens[i] + d.grad_sq[i] / gamma).collect();
            q.i2_shell += w * dot(&shell, &soft);
            q.band += w * dot(&band, &soft);
        }
    }
    Ok(q)
}

/// Evaluates every quantity of the argument at `gamma` and compares each with
/// its claimed bound.
///
/// `v` is the potential the trajectory was solved with; `cutoffs` must be
/// built at `R = R0 sqrt(gamma)`; `c_n` is the calibrated Carleman constant
/// entering `sigma = 64 c_n R^2` and the three conditions on `sigma`.
pub fn proof_chain_diagnostics(
    traj: &Trajectory,
    v: &PotentialSpec,
    gamma: f64,
    constants: &ScenarioConstants,
    cutoffs: &CutoffSet,
    c_n: f64,
) -> Result<ProofChainReport> {
    let ScenarioConstants { c0, r0, a, l, .. } = *constants;
    let fns = ScalarFns::new(gamma)?;
    if !(c_n > 0.0) {
        return Err(Error::Domain(format!("c_n must be positive, got {c_n}")));
    }
    if traj.t_start().abs() > 1e-12 {
        return Err(Error::Coverage(format!("trajectory must start at s = 0, starts at {}", traj.t_start())));
    }
    let r = r0 * gamma.sqrt();
    if (cutoffs.r() - r).abs() > 1e-12 * r {
        return Err(Error::Mismatch(format!("cutoffs built at R = {}, need R0 sqrt(gamma) = {r}", cutoffs.r())));
    }
    if let Some(floor) = admissible_gamma(constants) {
        if gamma < floor {
            return Err(Error::Admissibility(format!("gamma = {gamma} below the admissible minimum {floor}")));
        }
    }
    let (s1a, s1b) = fns.interval_1();
    let (s2a, s2b) = fns.interval_2();
    if !traj.covers(0.0, s2b) {
        return Err(Error::Coverage(format!("need s in [0, {s2b}], stored up to {}", traj.t_end())));
    }
    let (n1, n2) = (slices_within(traj, s1a, s1b), slices_within(traj, s2a, s2b));
    if n1 < MIN_CHAIN_SLICES || n2 < MIN_CHAIN_SLICES {
        return Err(Error::Resolution(format!(
            "{n1} and {n2} stored slices inside the two windows, need {MIN_CHAIN_SLICES}"
        )));
    }
    let grid = traj.grid();
    let reach = (fns.alpha(0.75) * (r + 1.0)).max(r0 * (1.0 + s2b * gamma) + 4.0 * r0 / gamma.sqrt());
    if reach + 3.0 * grid.spacing() > grid.half_width() {
        return Err(Error::Domain(format!(
            "integration regions reach |y| = {reach:.4}, box half width is {}",
            grid.half_width()
        )));
    }

    let q = measure(traj, v, fns, cutoffs, r0)?;
    let a2 = a * a;
    let bound_b1 = ChainBound::new(q.b1, 8.0 * a2 / gamma.powf(1.5));
    let bound_b2 = ChainBound::new(q.b2, 8.0 * a2 * l / (gamma * gamma));
    let bound_gamma_b = ChainBound::new(gamma * q.b, 16.0 * a2 / gamma.sqrt());
    let i1 = q.i11 + q.i12;
    let bound_i1 = ChainBound::new(i1, 216.0 * a2);
    let bound_i2 = ChainBound::new(q.i2, 32.0 * gamma * gamma * r0 * r0 * q.i2_shell);
    let floor = (!constants.is_degenerate()).then(|| ChainBound::new(0.25 * c0 * c0, q.floor));

    let sigma = 64.0 * c_n * r * r;
    let strength = sigma.powf(1.5) / (c_n * r * r);
    let condition_2 = strength >= 2.0 * l / gamma;
    let condition_3 = c0 > 0.0 && strength >= 512.0 * a / c0;
    let condition_4_log_lhs = (strength * c0 / 16.0).ln();
    let condition_4_log_rhs =
        log_add((16.0 * a).ln(), (6.0 * gamma * r0).ln() + 36.0 * sigma + 0.5 * q.band.ln());
    let condition_4 = condition_4_log_lhs <= condition_4_log_rhs;

    let coarse = traj.subsample(2);
    let resolution_drift = if slices_within(&coarse, s1a, s1b) >= 3 {
        let c = measure(&coarse, v, fns, cutoffs, r0)?;
        let rel = |x: f64, y: f64, scale: f64| (x - y).abs() / y.abs().max(1e-3 * scale).max(f64::MIN_POSITIVE);
        [
            rel(c.b1, q.b1, bound_b1.rhs),
            rel(c.b2, q.b2, bound_b2.rhs),
            rel(c.b_weighted, q.b_weighted, bound_gamma_b.rhs / gamma),
            rel(c.i11 + c.i12, i1, bound_i1.rhs),
            rel(c.i2, q.i2, bound_i2.rhs),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };

    Ok(ProofChainReport {
        gamma,
        r0,
        r,
        l,
        a,
        c_n,
        sigma,
        b: q.b,
        b_stated: q.b_stated,
        b_weighted: q.b_weighted,
        b_ball: q.b_ball,
        b1: q.b1,
        b2: q.b2,
        i11: q.i11,
        i12: q.i12,
        i1,
        i2: q.i2,
        bound_b1,
        bound_b2,
        bound_gamma_b,
        bound_i1,
        bound_i2,
        floor,
        a_local: q.a_local_sq.sqrt(),
        b1_rhs_local: 8.0 * q.a_local_sq / gamma.powf(1.5),
        b2_rhs_local: 8.0 * q.a_local_sq * l / (gamma * gamma),
        condition_2,
        condition_3,
        condition_4_log_lhs,
        condition_4_log_rhs,
        condition_4,
        resolution_drift,
    })
}
