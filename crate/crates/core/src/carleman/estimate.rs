use std::sync::Arc;

use super::cutoffs::CutoffSet;
use super::field::{SpaceTimeField, EDGE_MARGIN};
use super::operators::{shift_vector, weight_exponent};
use super::CarlemanConfig;
use crate::error::{Error, Result};
use crate::grid::{Grid, Trajectory};
use crate::propagator::GaussianPacket;
use crate::C64;

/// `sigma = k c R^2` for each `k`.
pub const SIGMA_MULTIPLIERS: [f64; 3] = [1.0, 2.0, 4.0];

const I: C64 = C64::new(0.0, 1.0);
const SUPPORT_SLACK: f64 = 1e-12;

/// `g = theta_R(x) eta(x / R + phi(t) e_1) v(x, t)`.
///
/// `v` must cover `[0, 1]`; the ball `|x| <= R + 1` must fit in the box with
/// the compact-support margin to spare.
pub fn build_g(v: &Trajectory, cutoffs: &CutoffSet) -> Result<SpaceTimeField> {
    let grid = v.grid();
    let dt = v.dt();
    if v.t_start() > 1e-12 || v.t_end() < 1.0 - 1e-9 * dt.max(1.0) {
        return Err(Error::Coverage(format!("v covers [{}, {}], need [0, 1]", v.t_start(), v.t_end())));
    }
    let reach = cutoffs.r() + 1.0 + EDGE_MARGIN as f64 * grid.spacing();
    if reach >= grid.half_width() {
        return Err(Error::Domain(format!(
            "box half-width {} leaves no margin around |x| <= R + 1 = {}",
            grid.half_width(),
            cutoffs.r() + 1.0
        )));
    }
    let dim = grid.dim();
    let slices = (0..v.len())
        .map(|k| {
            let t = v.time(k);
            v.field(k)
                .values()
                .iter()
                .enumerate()
                .map(|(i, val)| {
                    let x = grid.point(i);
                    let theta = cutoffs.theta(grid.radius(i));
                    if theta == 0.0 {
                        return C64::new(0.0, 0.0);
                    }
                    let eta = cutoffs.eta(weight_exponent(cutoffs, &x[..dim], t).sqrt());
                    if eta == 0.0 {
                        return C64::new(0.0, 0.0);
                    }
                    val * (theta * eta)
                })
                .collect()
        })
        .collect();
    SpaceTimeField::compact(grid.clone(), v.t_start(), dt, slices)
}

/// One evaluation of the weighted inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct CarlemanCheck {
    pub sigma: f64,
    pub c_n: f64,
    pub log_lhs: f64,
    pub log_rhs: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs / lhs`; `0 / 0` is reported as 1.
    pub ratio: f64,
    pub pass: bool,
    pub admissible: bool,
}

/// `g` with `(i d_t + Lap) g` precomputed, for repeated evaluation over `sigma`.
#[derive(Clone, Debug)]
pub struct CarlemanProbe {
    cutoffs: CutoffSet,
    g: SpaceTimeField,
    pg: SpaceTimeField,
    weight: Vec<Vec<f64>>,
    near_support: Vec<Vec<bool>>,
}

impl CarlemanProbe {
    /// Fails if `g` is not certified compact or touches `|x/R + phi e_1| < 1`.
    pub fn new(g: &SpaceTimeField, cutoffs: &CutoffSet) -> Result<Self> {
        if !g.is_compact() {
            return Err(Error::Support("g must be compactly supported".into()));
        }
        let grid = g.grid();
        let dim = grid.dim();
        let mut weight = Vec::with_capacity(g.len());
        for k in 0..g.len() {
            let t = g.time(k);
            let mut wk = Vec::with_capacity(grid.len());
            for (i, v) in g.slice(k).iter().enumerate() {
                let w = weight_exponent(cutoffs, &grid.point(i)[..dim], t);
                let on = *v != C64::new(0.0, 0.0);
                if on && w < 1.0 - SUPPORT_SLACK {
                    let b = shift_vector(cutoffs, &grid.point(i)[..dim], t);
                    return Err(Error::Support(format!(
                        "g is nonzero at t = {t:.6} where |x/R + phi e_1| = {:.6} < 1",
                        (b[0] * b[0] + b[1] * b[1]).sqrt()
                    )));
                }
                wk.push(w);
            }
            weight.push(wk);
        }
        // (i d_t + Lap) g vanishes off the space-time support, up to the
        // time stencil reach; spectral round-off there must not be weighted.
        let near_support = g.support_mask(2);
        let pg = g.time_derivative().map(|_, _, v| I * v).add(&g.laplacian(), C64::new(1.0, 0.0))?;
        Ok(CarlemanProbe { cutoffs: cutoffs.clone(), g: g.clone(), pg, weight, near_support })
    }

    pub fn field(&self) -> &SpaceTimeField {
        &self.g
    }

    /// `log || e^{sigma w} g ||`
    pub fn log_weighted_g(&self, sigma: f64) -> f64 {
        self.g.log_weighted_norm(|k, i| sigma * self.weight[k][i], |_, _| true)
    }

    /// `log || e^{sigma w} (i d_t + Lap) g ||`
    pub fn log_weighted_pg(&self, sigma: f64) -> f64 {
        self.pg.log_weighted_norm(|k, i| sigma * self.weight[k][i], |k, i| self.near_support[k][i])
    }

    /// `log` of the smallest constant `c` for which the inequality holds at `sigma`.
    pub fn log_required_constant(&self, sigma: f64) -> f64 {
        let lg = self.log_weighted_g(sigma);
        if lg == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let lp = self.log_weighted_pg(sigma);
        1.5 * sigma.ln() - 2.0 * self.cutoffs.r().ln() + lg - lp
    }

    pub fn check(&self, sigma: f64, c_n: f64) -> CarlemanCheck {
        let r = self.cutoffs.r();
        let admissible = sigma >= c_n * r * r;
        let lg = self.log_weighted_g(sigma);
        if lg == f64::NEG_INFINITY {
            return CarlemanCheck {
                sigma,
                c_n,
                log_lhs: f64::NEG_INFINITY,
                log_rhs: self.log_weighted_pg(sigma),
                lhs: 0.0,
                rhs: self.log_weighted_pg(sigma).exp(),
                ratio: 1.0,
                pass: true,
                admissible,
            };
        }
        let log_rhs = self.log_weighted_pg(sigma);
        let log_lhs = 1.5 * sigma.ln() - (c_n * r * r).ln() + lg;
        CarlemanCheck {
            sigma,
            c_n,
            log_lhs,
            log_rhs,
            lhs: log_lhs.exp(),
            rhs: log_rhs.exp(),
            ratio: (log_rhs - log_lhs).exp(),
            pass: self.log_required_constant(sigma) <= c_n.ln(),
            admissible,
        }
    }
}

/// Both sides of the weighted inequality for `g` at `cfg`.
pub fn carleman_check(g: &SpaceTimeField, cfg: &CarlemanConfig) -> Result<CarlemanCheck> {
    Ok(CarlemanProbe::new(g, cfg.cutoffs())?.check(cfg.sigma(), cfg.c_n_candidate()))
}

/// Named member of a calibration suite.
#[derive(Clone, Debug)]
pub struct SuiteMember {
    pub name: String,
    pub g: SpaceTimeField,
}

/// `exp(1 - 1 / (1 - z^2))` on `|z| < 1`, zero outside.
pub fn smooth_bump(z: f64) -> f64 {
    if z.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - z * z)).exp()
    }
}

/// Infinitely smooth step from 0 at `z <= 0` to 1 at `z >= 1`.
pub fn smooth_step(z: f64) -> f64 {
    let f = |y: f64| if y <= 0.0 { 0.0 } else { (-1.0 / y).exp() };
    let (a, b) = (f(z), f(1.0 - z));
    a / (a + b)
}

/// Bump `B(|x - c| / r) B((t - 1/2) / tau) e^{i p x_1}` centered at
/// `c = side * 2.5 R e_1`, times a smooth step in `|b| - 1` over `[0, 1/4]`
/// so that it vanishes where `|x/R + phi e_1| < 1`. `B` is [`smooth_bump`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpSpec {
    pub side: f64,
    pub radius: f64,
    pub time_half_width: f64,
    pub momentum: f64,
}

///
/// Sampled on `window` with `steps` time steps.
pub fn bump_member(
    grid: &Arc<Grid>,
    cutoffs: &CutoffSet,
    window: (f64, f64),
    steps: usize,
    spec: BumpSpec,
) -> Result<SpaceTimeField> {
    let center = spec.side * 2.5 * cutoffs.r();
    let dt = (window.1 - window.0) / steps as f64;
    let f = SpaceTimeField::from_fn(grid.clone(), window.0, dt, steps + 1, |x, t| {
        let mut d2 = (x[0] - center).powi(2);
        if x.len() > 1 {
            d2 += x[1] * x[1];
        }
        let space = smooth_bump(d2.sqrt() / spec.radius);
        let time = smooth_bump((t - 0.5) / spec.time_half_width);
        if space == 0.0 || time == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let guard = smooth_step((weight_exponent(cutoffs, x, t).sqrt() - 1.0) / 0.25);
        C64::from_polar(space * time * guard, spec.momentum * x[0])
    })?;
    SpaceTimeField::compact(grid.clone(), window.0, dt, f.slices().to_vec())
}

const BUMPS: [BumpSpec; 6] = [
    BumpSpec { side: 1.0, radius: 1.0, time_half_width: 0.1, momentum: 0.0 },
    BumpSpec { side: -1.0, radius: 1.0, time_half_width: 0.1, momentum: 0.0 },
    BumpSpec { side: 1.0, radius: 0.6, time_half_width: 0.1, momentum: 2.0 },
    BumpSpec { side: -1.0, radius: 0.8, time_half_width: 0.2, momentum: 1.0 },
    BumpSpec { side: 1.0, radius: 1.2, time_half_width: 0.2, momentum: -1.5 },
    BumpSpec { side: -1.0, radius: 0.5, time_half_width: 0.12, momentum: 3.0 },
];

/// The declared calibration suite: six bumps and four localized free
/// Gaussian packets `build_g(v)`, all on `[0, 1]` with `steps` time steps.
pub fn standard_suite(grid: &Arc<Grid>, cutoffs: &CutoffSet, steps: usize) -> Result<Vec<SuiteMember>> {
    let reach = 2.5 * cutoffs.r() + BUMPS.iter().map(|b| b.radius).fold(0.0, f64::max);
    if reach + EDGE_MARGIN as f64 * grid.spacing() >= grid.half_width() {
        return Err(Error::Domain(format!("suite needs a box half-width above {reach}")));
    }
    let mut out = Vec::with_capacity(10);
    for (j, spec) in BUMPS.iter().enumerate() {
        out.push(SuiteMember { name: format!("bump_{j}"), g: bump_member(grid, cutoffs, (0.0, 1.0), steps, *spec)? });
    }
    let packets = [
        GaussianPacket::new([0.0, 0.0], 1.0, [0.0, 0.0])?,
        GaussianPacket::new([1.0, 0.0], 0.7, [1.0, 0.0])?,
        GaussianPacket::new([-1.5, 0.0], 1.3, [-0.5, 0.0])?,
        GaussianPacket::new([0.5, 0.0], 0.5, [2.0, 0.0])?,
    ];
    let dt = 1.0 / steps as f64;
    for (j, p) in packets.iter().enumerate() {
        let v = p.trajectory(grid, 0.0, dt, steps + 1)?;
        out.push(SuiteMember { name: format!("localized_packet_{j}"), g: build_g(&v, cutoffs)? });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckRecord {
    pub member: String,
    pub multiplier: f64,
    pub check: CarlemanCheck,
}

/// Empirical constant for a declared suite and `sigma` grid `k c R^2`.
///
/// `c_n` is the smallest constant for which every check passes. It is
/// admissible when `c_n <= c`, i.e. every `sigma` in the grid is at least
/// `c_n R^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub sigma_scale: f64,
    pub c_n: f64,
    pub records: Vec<CheckRecord>,
    pub all_pass: bool,
    /// Pass at `k` implies pass at the next multiplier, per member.
    pub monotone: bool,
    pub admissible: bool,
}

impl CheckRecord {
    /// Smallest constant for which this check alone would pass.
    pub fn required_constant(&self) -> f64 {
        if self.check.log_lhs == f64::NEG_INFINITY {
            return 0.0;
        }
        (self.check.log_lhs - self.check.log_rhs).exp() * self.check.c_n
    }
}

pub fn calibrate_constant(
    suite: &[SuiteMember],
    cutoffs: &CutoffSet,
    sigma_scale: f64,
    multipliers: &[f64],
) -> Result<Calibration> {
    if suite.is_empty() || multipliers.is_empty() {
        return Err(Error::Degenerate("calibration needs a suite and at least one multiplier".into()));
    }
    if !(sigma_scale > 0.0) || !sigma_scale.is_finite() {
        return Err(Error::Domain(format!("sigma scale must be positive, got {sigma_scale}")));
    }
    let probes = suite.iter().map(|m| CarlemanProbe::new(&m.g, cutoffs)).collect::<Result<Vec<_>>>()?;
    let r2 = cutoffs.r() * cutoffs.r();
    let worst = probes
        .iter()
        .flat_map(|p| multipliers.iter().map(move |k| p.log_required_constant(k * sigma_scale * r2)))
        .fold(f64::NEG_INFINITY, f64::max);
    if !worst.is_finite() {
        return Err(Error::Degenerate("suite gives no finite constant".into()));
    }
    // one part in 10^12 above the worst case absorbs exp/ln round trip
    let c_n = worst.exp() * (1.0 + 1e-12);
    let mut records = Vec::with_capacity(probes.len() * multipliers.len());
    let mut monotone = true;
    for (m, p) in suite.iter().zip(&probes) {
        let mut prev_pass = false;
        for k in multipliers {
            let check = p.check(k * sigma_scale * r2, c_n);
            if prev_pass && !check.pass {
                monotone = false;
            }
            prev_pass = check.pass;
            records.push(CheckRecord { member: m.name.clone(), multiplier: *k, check });
        }
    }
    let all_pass = records.iter().all(|r| r.check.pass);
    Ok(Calibration { sigma_scale, c_n, records, all_pass, monotone, admissible: c_n <= sigma_scale })
}
