use std::collections::BTreeMap;

use super::{region_weights, t_star, weighted_sum, ObservabilityQuery, ScenarioConstants, MIN_WINDOW_SLICES};
use crate::error::{Error, Result};
use crate::grid::Trajectory;
use crate::interp::{slices_within, trapezoid_nodes};
use crate::sum::{pairwise, pairwise_by};

/// The two non-negative parts of `J`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JParts {
    /// `(1/t) int int |u|^2`
    pub mass: f64,
    /// `(1/t) int int s |grad u|^2`
    pub gradient: f64,
}

impl JParts {
    pub fn total(&self) -> f64 {
        self.mass + self.gradient
    }
}

struct Densities {
    mass: Vec<f64>,
    gradient: Vec<f64>,
}

/// `J(rho, t)` split into its mass and gradient parts.
///
/// The time integral is a composite trapezoid over the stored slices inside
/// `[t/4, 3t]`, closed at both ends by linear interpolation between the two
/// neighbouring slices, each weighted by the region at the endpoint.
pub fn observability_parts(traj: &Trajectory, query: &ObservabilityQuery) -> Result<JParts> {
    let grid = traj.grid();
    query.validate(grid)?;
    let (a, b) = query.time_window();
    let nodes = trapezoid_nodes(traj, a, b)?;
    let inside = slices_within(traj, a, b);
    if inside < MIN_WINDOW_SLICES {
        return Err(Error::Resolution(format!(
            "{inside} stored slices inside [{a}, {b}], need {MIN_WINDOW_SLICES}"
        )));
    }
    let mut densities: BTreeMap<usize, Densities> = BTreeMap::new();
    let (mut mass, mut gradient) = (Vec::with_capacity(nodes.len()), Vec::with_capacity(nodes.len()));
    for node in &nodes {
        let w = region_weights(query, grid, node.s)?;
        let (mut m, mut g) = (0.0, 0.0);
        for &(k, lambda) in &node.slices {
            let d = densities.entry(k).or_insert_with(|| {
                let f = traj.field(k);
                Densities { mass: f.values().iter().map(|v| v.norm_sqr()).collect(), gradient: f.gradient_density() }
            });
            m += lambda * weighted_sum(&w, &d.mass);
            g += lambda * weighted_sum(&w, &d.gradient);
        }
        mass.push(node.weight * m);
        gradient.push(node.weight * node.s * g);
    }
    Ok(JParts { mass: pairwise(&mass) / query.t, gradient: pairwise(&gradient) / query.t })
}

/// `J(rho, t) = (1/t) int_{t/4}^{3t} int_{region(s)} |u|^2 + s |grad u|^2 dy ds`
pub fn observability_functional(traj: &Trajectory, query: &ObservabilityQuery) -> Result<f64> {
    Ok(observability_parts(traj, query)?.total())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowerBoundReport {
    /// Set when `c0 = 0`; nothing else is meaningful then.
    pub skipped: bool,
    pub j: f64,
    /// `c rho^2 / t + ln J`
    pub log_lhs: f64,
    /// `ln c0^2`
    pub log_rhs: f64,
    pub log_margin: f64,
    pub pass: bool,
}

/// Tests `e^{c rho^2 / t} J(rho, t) >= c0^2` in log scale.
pub fn lower_bound_check(
    traj: &Trajectory,
    query: &ObservabilityQuery,
    constants: &ScenarioConstants,
    c_fit: f64,
) -> Result<LowerBoundReport> {
    if constants.is_degenerate() {
        return Ok(LowerBoundReport {
            skipped: true,
            j: 0.0,
            log_lhs: f64::NAN,
            log_rhs: f64::NEG_INFINITY,
            log_margin: f64::NAN,
            pass: false,
        });
    }
    let ts = t_star(constants)?;
    if !(query.t < ts) {
        return Err(Error::Domain(format!("t = {} is not below t* = {ts}", query.t)));
    }
    let upper = constants.m.unwrap_or(f64::INFINITY);
    if query.rho < constants.r0 || query.rho > upper {
        return Err(Error::Domain(format!("rho = {} outside [R0, M] = [{}, {upper}]", query.rho, constants.r0)));
    }
    let j = observability_functional(traj, query)?;
    let log_lhs = c_fit * query.rho * query.rho / query.t + j.ln();
    let log_rhs = 2.0 * constants.c0.ln();
    let log_margin = log_lhs - log_rhs;
    Ok(LowerBoundReport { skipped: false, j, log_lhs, log_rhs, log_margin, pass: log_margin >= 0.0 })
}

/// Least-squares line `ln J = intercept + slope * rho^2 / t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

impl DecayFit {
    /// `-slope`, the empirical stand-in for the dimensional constant.
    pub fn c_emp(&self) -> f64 {
        -self.slope
    }
}

/// Fits `ln J` against `rho^2 / t` over `(rho, t, J)` samples.
pub fn decay_fit(samples: &[(f64, f64, f64)]) -> Result<DecayFit> {
    if samples.len() < 5 {
        return Err(Error::Domain(format!("decay fit needs at least 5 samples, got {}", samples.len())));
    }
    if let Some(bad) = samples.iter().find(|s| !(s.2 > 0.0) || !s.2.is_finite()) {
        return Err(Error::Domain(format!("non-positive J = {} at rho = {}, t = {}", bad.2, bad.0, bad.1)));
    }
    let xs: Vec<f64> = samples.iter().map(|(r, t, _)| r * r / t).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.2.ln()).collect();
    let n = xs.len();
    let mx = pairwise_by(n, |i| xs[i]) / n as f64;
    let my = pairwise_by(n, |i| ys[i]) / n as f64;
    let sxx = pairwise_by(n, |i| (xs[i] - mx).powi(2));
    let sxy = pairwise_by(n, |i| (xs[i] - mx) * (ys[i] - my));
    let syy = pairwise_by(n, |i| (ys[i] - my).powi(2));
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("all samples share the same rho^2 / t".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sres = pairwise_by(n, |i| (ys[i] - intercept - slope * xs[i]).powi(2));
    // an exactly flat response is fitted perfectly
    let r2 = if syy <= 1e-300 { 1.0 } else { 1.0 - sres / syy };
    Ok(DecayFit { slope, intercept, r2 })
}

/// Ratio between successive tail terms that counts as growth or decay.
pub const TAIL_RATIO: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitClass {
    ToZero,
    Bounded,
    ToInfinity,
}

/// Classifies a series, given as logarithms ordered towards the limit, by
/// its last three successive ratios.
pub fn classify_series(log_values: &[f64]) -> Result<LimitClass> {
    if log_values.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 probe samples, got {}", log_values.len())));
    }
    let n = log_values.len();
    if log_values[n - 1] == f64::NEG_INFINITY {
        return Ok(LimitClass::ToZero);
    }
    let step = TAIL_RATIO.ln();
    let tail = &log_values[n.saturating_sub(4)..];
    let diffs: Vec<f64> = tail.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.iter().all(|d| *d > step) {
        Ok(LimitClass::ToInfinity)
    } else if diffs.iter().all(|d| *d < -step) {
        Ok(LimitClass::ToZero)
    } else {
        Ok(LimitClass::Bounded)
    }
}

/// Which limit the probe follows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProbeMode {
    /// `t -> 0` at fixed `rho`; samples are decreasing times.
    TToZero { rho: f64 },
    /// `rho -> infinity` at fixed `t`; samples are increasing radii.
    RhoToInf { t: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSeries {
    pub mode: ProbeMode,
    pub c: f64,
    pub samples: Vec<f64>,
    /// `ln((1/t) e^{c rho^2 / t} int int ...)`
    pub log_values: Vec<f64>,
    pub class: LimitClass,
}

impl ProbeSeries {
    /// The probed quantity itself; overflows to infinity for large exponents.
    pub fn values(&self) -> Vec<f64> {
        self.log_values.iter().map(|l| l.exp()).collect()
    }
}

/// Evaluates `e^{c rho^2 / t} J(rho, t)` along the samples of `mode`.
pub fn uniqueness_probe(traj: &Trajectory, c: f64, mode: ProbeMode, samples: &[f64]) -> Result<ProbeSeries> {
    let ordered = match mode {
        ProbeMode::TToZero { .. } => samples.windows(2).all(|w| w[1] < w[0]),
        ProbeMode::RhoToInf { .. } => samples.windows(2).all(|w| w[1] > w[0]),
    };
    if !ordered {
        return Err(Error::Domain("probe samples must move strictly towards the limit".into()));
    }
    let log_values = samples
        .iter()
        .map(|&x| {
            let query = match mode {
                ProbeMode::TToZero { rho } => ObservabilityQuery::new(rho, x)?,
                ProbeMode::RhoToInf { t } => ObservabilityQuery::new(x, t)?,
            };
            let j = observability_functional(traj, &query)?;
            Ok(c * query.rho * query.rho / query.t + j.ln())
        })
        .collect::<Result<Vec<f64>>>()?;
    let class = classify_series(&log_values)?;
    Ok(ProbeSeries { mode, c, samples: samples.to_vec(), log_values, class })
}
