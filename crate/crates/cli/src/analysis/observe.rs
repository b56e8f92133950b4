use obslab_core::grid::{Grid, Trajectory};
use obslab_core::observability::{
    compute_constants, decay_fit, lower_bound_check, observability_parts, t_star, uniqueness_probe, LimitClass,
    ObservabilityQuery, ProbeMode,
};

use super::{table, violation, Analysis, Context, Outcome, TableSpec};
use crate::config::{ObserveSpec, Scenario, Source, Violation};
use crate::error::CliError;
use crate::output::{Cell, Check, PlotData};

/// `J(rho, t)` tables, the decay fit, the held-out lower bound and the probes.
pub struct ObserveAnalysis;

const TABLES: &[TableSpec] = &[
    ("observe_j", &["rho", "t", "j", "mass_part", "gradient_part"]),
    ("observe_fit", &["c0", "a", "l", "t_star", "t_fit", "slope", "intercept", "r2", "pass"]),
    ("observe_lower_bound", &["rho", "t", "j", "c_fit", "log_lhs", "log_rhs", "log_margin", "pass"]),
    ("observe_probe", &["mode", "factor", "c", "sample", "log_value", "class", "expected", "pass"]),
];

/// Decay fits below this coefficient of determination fail.
pub const MIN_FIT_R2: f64 = 0.99;
/// `t_to_zero` probes sample `t_fit * PROBE_T_RATIO^j`.
pub const PROBE_T_RATIO: f64 = 0.8;
pub const PROBE_T_SAMPLES: usize = 6;
/// `rho_to_inf` probes sample `R0 + PROBE_RHO_STEP * j`.
pub const PROBE_RHO_STEP: f64 = 0.5;
pub const PROBE_RHO_SAMPLES: usize = 5;

fn parse_mode(s: &str) -> Option<bool> {
    match s {
        "t_to_zero" => Some(true),
        "rho_to_inf" => Some(false),
        _ => None,
    }
}

fn parse_class(s: &str) -> Option<LimitClass> {
    match s {
        "to_zero" => Some(LimitClass::ToZero),
        "bounded" => Some(LimitClass::Bounded),
        "to_infinity" => Some(LimitClass::ToInfinity),
        _ => None,
    }
}

fn class_name(c: LimitClass) -> &'static str {
    match c {
        LimitClass::ToZero => "to_zero",
        LimitClass::Bounded => "bounded",
        LimitClass::ToInfinity => "to_infinity",
    }
}

fn query(spec: &ObserveSpec, rho: f64, t: f64) -> Result<ObservabilityQuery, obslab_core::Error> {
    let q = ObservabilityQuery::new(rho, t)?.with_band_factor(spec.band_factor)?;
    Ok(if spec.periodic { q.periodic() } else { q })
}

impl Analysis for ObserveAnalysis {
    fn name(&self) -> &'static str {
        "observe"
    }

    fn tables(&self) -> &'static [TableSpec] {
        TABLES
    }

    fn enabled(&self, s: &Scenario) -> bool {
        s.observe.is_some()
    }

    fn validate(&self, s: &Scenario, src: &Source, grid: Option<&Grid>) -> Vec<Violation> {
        let Some(o) = &s.observe else { return Vec::new() };
        let mut out = Vec::new();
        let mut bad = |key: &str, msg: String| out.push(violation(src, "observe", key, msg));
        if !(o.r0 > 0.0) {
            bad("r0", format!("R0 must be positive, got {}", o.r0));
        }
        if let Some(m) = o.m {
            if !(m >= 4.0 * o.r0 + 1.0) {
                bad(
                    "m",
                    format!("M = {m} violates the observability hypothesis M >= 4 R0 + 1 = {}", 4.0 * o.r0 + 1.0),
                );
            }
        }
        if !(o.band_factor > 0.0) {
            bad("band_factor", format!("band factor must be positive, got {}", o.band_factor));
        }
        if o.rho.is_empty() || o.rho.iter().any(|r| !(*r > 0.0)) {
            bad("rho", "rho must be a non-empty list of positive radii".into());
        }
        match o.t {
            Some(t) => {
                if !(t > 0.0) {
                    bad("t", format!("t must be positive, got {t}"));
                } else if 3.0 * t > s.time.t_end * (1.0 + 1e-12) {
                    bad("t", format!("the window [t/4, 3t] ends at {} beyond t_end = {}", 3.0 * t, s.time.t_end));
                }
                if let (Some(g), true) = (grid, t > 0.0 && o.band_factor > 0.0) {
                    for &rho in o.rho.iter().filter(|r| **r > 0.0) {
                        if let Err(e) = query(o, rho, t).and_then(|q| q.validate(g)) {
                            bad("rho", format!("rho = {rho}: {e}"));
                        }
                    }
                }
                if !o.probes.is_empty() || !o.held_out_fractions.is_empty() {
                    bad("t", "probes and held-out checks use the fitted time; leave t unset".into());
                }
            }
            None => {
                if o.rho.len() < 5 {
                    bad("rho", format!("the decay fit needs at least 5 radii, got {}", o.rho.len()));
                }
                if !(o.fit_fraction > 0.0 && o.fit_fraction <= 1.0) {
                    bad("fit_fraction", format!("fit_fraction must lie in (0, 1], got {}", o.fit_fraction));
                }
            }
        }
        if o.held_out_fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            bad("held_out_fractions", "held-out fractions must lie in (0, 1)".into());
        }
        if o.held_out_fractions.is_empty() != o.held_out_rho.is_empty() {
            bad("held_out_rho", "held_out_fractions and held_out_rho must both be set".into());
        }
        for p in &o.probes {
            if parse_mode(&p.mode).is_none() {
                bad("mode", format!("unknown probe mode `{}`; known: t_to_zero, rho_to_inf", p.mode));
            }
            if parse_class(&p.expect).is_none() {
                bad("expect", format!("unknown class `{}`; known: to_zero, bounded, to_infinity", p.expect));
            }
            if !(p.factor > 0.0) {
                bad("factor", format!("probe factor must be positive, got {}", p.factor));
            }
        }
        out
    }

    fn needs_solve(&self) -> bool {
        true
    }

    fn run(&self, ctx: &Context) -> Result<Outcome, CliError> {
        let spec = ctx.scenario.observe.as_ref().ok_or_else(|| CliError::Usage("no [observe] block".into()))?;
        let traj = ctx.trajectory()?;
        let mut out = Outcome::default();
        match spec.t {
            Some(t) => {
                let (jt, plot) = j_table(traj, spec, t)?;
                out.tables.push(jt);
                out.plots.push(plot);
            }
            None => fitted(ctx, traj, spec, &mut out)?,
        }
        Ok(out)
    }
}

fn j_table(traj: &Trajectory, spec: &ObserveSpec, t: f64) -> Result<(crate::output::Table, PlotData), CliError> {
    let mut jt = table(TABLES, "observe_j");
    let mut plot = PlotData::new("observe_j.dat", &["rho", "j"]);
    for &rho in &spec.rho {
        let p = observability_parts(traj, &query(spec, rho, t)?)?;
        jt.push(vec![rho.into(), t.into(), p.total().into(), p.mass.into(), p.gradient.into()]);
        plot.rows.push(vec![rho, p.total()]);
    }
    Ok((jt, plot))
}

fn fitted(ctx: &Context, traj: &Trajectory, spec: &ObserveSpec, out: &mut Outcome) -> Result<(), CliError> {
    let k = compute_constants(traj, &ctx.potential, spec.r0, spec.m)?;
    let ts = t_star(&k)?;
    let dt = traj.dt();
    let t_fit = (spec.fit_fraction * ts / dt).floor() * dt;
    let (jt, plot) = j_table(traj, spec, t_fit)?;
    let samples: Vec<(f64, f64, f64)> = jt.rows.iter().map(|r| (r[0].as_f64().unwrap(), t_fit, r[2].as_f64().unwrap())).collect();
    let fit = decay_fit(&samples)?;
    let fit_ok = fit.r2 >= MIN_FIT_R2 && fit.slope < 0.0;
    let mut ft = table(TABLES, "observe_fit");
    ft.push(vec![
        k.c0.into(),
        k.a.into(),
        k.l.into(),
        ts.into(),
        t_fit.into(),
        fit.slope.into(),
        fit.intercept.into(),
        fit.r2.into(),
        fit_ok.into(),
    ]);
    out.checks.push(Check::new("observe.fit", fit_ok, format!("r2 = {:.6}, slope = {:.6e}", fit.r2, fit.slope)));
    let mut log_plot = PlotData::new("observe_log_j.dat", &["rho2_over_t", "log_j"]);
    log_plot.rows = samples.iter().map(|(r, t, j)| vec![r * r / t, j.ln()]).collect();
    out.tables.push(jt);
    out.tables.push(ft);
    out.plots.push(plot);
    out.plots.push(log_plot);

    let c_fit = fit.c_emp();
    let mut lt = table(TABLES, "observe_lower_bound");
    let mut grid_plot = PlotData::new("observe_lower_bound.dat", &["rho", "t", "log_margin"]);
    let mut held_ok = true;
    for &frac in &spec.held_out_fractions {
        for &rho in &spec.held_out_rho {
            let q = query(spec, rho, frac * t_fit)?;
            let r = lower_bound_check(traj, &q, &k, c_fit)?;
            held_ok &= r.pass;
            lt.push(vec![
                rho.into(),
                q.t.into(),
                r.j.into(),
                c_fit.into(),
                r.log_lhs.into(),
                r.log_rhs.into(),
                r.log_margin.into(),
                r.pass.into(),
            ]);
            grid_plot.rows.push(vec![rho, q.t, r.log_margin]);
        }
    }
    if !lt.rows.is_empty() {
        out.checks.push(Check::new("observe.lower_bound", held_ok, format!("{} held-out points", lt.rows.len())));
        out.plots.push(grid_plot);
    }
    out.tables.push(lt);

    let mut pt = table(TABLES, "observe_probe");
    for (j, p) in spec.probes.iter().enumerate() {
        let to_zero_t = parse_mode(&p.mode).expect("validated");
        let expected = parse_class(&p.expect).expect("validated");
        let c = p.factor * c_fit;
        let (mode, samples) = if to_zero_t {
            (ProbeMode::TToZero { rho: spec.r0 }, (0..PROBE_T_SAMPLES).map(|i| t_fit * PROBE_T_RATIO.powi(i as i32)).collect::<Vec<_>>())
        } else {
            (
                ProbeMode::RhoToInf { t: t_fit },
                (0..PROBE_RHO_SAMPLES).map(|i| spec.r0 + PROBE_RHO_STEP * i as f64).collect::<Vec<_>>(),
            )
        };
        let series = uniqueness_probe(traj, c, mode, &samples)?;
        let pass = series.class == expected;
        out.checks.push(Check::new(
            format!("observe.probe_{j}"),
            pass,
            format!("{} at {} c_fit: {} (expected {})", p.mode, p.factor, class_name(series.class), p.expect),
        ));
        let mut plot = PlotData::new(format!("observe_probe_{j}.dat"), &["sample", "log_value"]);
        for (x, lv) in series.samples.iter().zip(&series.log_values) {
            pt.push(vec![
                Cell::text(&p.mode),
                p.factor.into(),
                c.into(),
                (*x).into(),
                (*lv).into(),
                class_name(series.class).into(),
                p.expect.as_str().into(),
                pass.into(),
            ]);
            plot.rows.push(vec![*x, *lv]);
        }
        out.plots.push(plot);
    }
    out.tables.push(pt);
    Ok(())
}
