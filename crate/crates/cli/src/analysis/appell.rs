use obslab_core::appell::{
    appell_transform, check_scalar_bounds, closure_study, evaluate_bounds_at, standard_triples, AppellParams, ClosureSetup,
    Direction, TimeSamples, IDENTITY_TOLERANCE,
};
use obslab_core::grid::Grid;
use obslab_core::propagator::GaussianPacket;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{table, violation, Analysis, Context, Outcome, TableSpec};
use crate::config::{Scenario, Source, Violation};
use crate::error::CliError;
use crate::output::{Cell, Check, PlotData};

/// Scalar bounds of the time change, the closure study and the identity case.
pub struct AppellAnalysis;

const TABLES: &[TableSpec] = &[
    ("appell_bounds", &["gamma", "samples", "worst_check", "worst_margin", "pass"]),
    ("appell_bound_detail", &["gamma", "check", "worst_margin", "pass"]),
    ("appell_random", &["samples", "seed", "gamma_lo", "gamma_hi", "failures", "worst_margin", "identity_max", "pass"]),
    ("appell_closure", &["triple", "level", "points", "dt", "residual", "relative", "order", "pass"]),
    ("appell_identity", &["alpha", "slices", "max_diff", "pass"]),
];

/// Observed orders below this fail the closure study.
pub const MIN_CLOSURE_ORDER: f64 = 1.8;
/// Random `gamma` are drawn log-uniformly from `(GAMMA_LO, GAMMA_HI]`.
pub const GAMMA_LO: f64 = 16.0 + 1e-9;
pub const GAMMA_HI: f64 = 1e8;
const MAX_LEVELS: u32 = 4;

/// `(gamma, u)` samples, log-uniform in `gamma` and uniform in `u in [0, 1]`.
pub fn random_bound_samples(seed: u64, n: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let g = GAMMA_LO * (GAMMA_HI / GAMMA_LO).powf(rng.random_range(0.0..=1.0));
            (g, rng.random_range(0.0..=1.0))
        })
        .collect()
}

impl Analysis for AppellAnalysis {
    fn name(&self) -> &'static str {
        "appell"
    }

    fn tables(&self) -> &'static [TableSpec] {
        TABLES
    }

    fn enabled(&self, s: &Scenario) -> bool {
        s.appell.is_some()
    }

    fn validate(&self, s: &Scenario, src: &Source, _: Option<&Grid>) -> Vec<Violation> {
        let Some(a) = &s.appell else { return Vec::new() };
        let mut out = Vec::new();
        for g in &a.bound_gammas {
            if !(*g > 16.0) || !g.is_finite() {
                out.push(violation(src, "appell", "bound_gammas", format!("the bound suite requires gamma > 16, got {g}")));
            }
        }
        if a.bound_samples < 100 {
            out.push(violation(src, "appell", "bound_samples", format!("at least 100 samples, got {}", a.bound_samples)));
        }
        if a.closure {
            if !(a.gamma > 0.0) || !a.gamma.is_finite() {
                out.push(violation(src, "appell", "gamma", format!("closure gamma must be positive, got {}", a.gamma)));
            }
            if !(2..=MAX_LEVELS).contains(&a.levels) {
                out.push(violation(src, "appell", "levels", format!("levels must lie in 2..={MAX_LEVELS}, got {}", a.levels)));
            }
        }
        out
    }

    fn needs_solve(&self) -> bool {
        false
    }

    fn run(&self, ctx: &Context) -> Result<Outcome, CliError> {
        let spec = ctx.scenario.appell.as_ref().ok_or_else(|| CliError::Usage("no [appell] block".into()))?;
        let mut out = Outcome::default();

        let mut bt = table(TABLES, "appell_bounds");
        let mut dt = table(TABLES, "appell_bound_detail");
        for &g in &spec.bound_gammas {
            let rep = check_scalar_bounds(g, spec.bound_samples)?;
            let worst = rep.checks.iter().min_by(|a, b| a.worst_margin.total_cmp(&b.worst_margin)).expect("checks");
            bt.push(vec![g.into(), spec.bound_samples.into(), worst.name.into(), worst.worst_margin.into(), rep.all_pass().into()]);
            for c in &rep.checks {
                dt.push(vec![g.into(), c.name.into(), c.worst_margin.into(), c.pass.into()]);
            }
            out.checks.push(Check::new(format!("appell.bounds_{g}"), rep.all_pass(), format!("worst {}", worst.name)));
        }
        out.tables.push(bt);
        out.tables.push(dt);

        let mut rt = table(TABLES, "appell_random");
        if spec.random_samples > 0 {
            let (mut failures, mut worst, mut identity) = (0usize, f64::INFINITY, 0.0f64);
            for (g, u) in random_bound_samples(ctx.seed, spec.random_samples) {
                for b in evaluate_bounds_at(g, u)? {
                    if !b.holds() {
                        failures += 1;
                    }
                    worst = worst.min(b.margin());
                    if b.name == "alpha_s_identity" {
                        identity = identity.max(b.value.abs());
                    }
                }
            }
            let pass = failures == 0 && identity <= IDENTITY_TOLERANCE;
            rt.push(vec![
                spec.random_samples.into(),
                Cell::Int(ctx.seed as i64),
                GAMMA_LO.into(),
                GAMMA_HI.into(),
                failures.into(),
                worst.into(),
                identity.into(),
                pass.into(),
            ]);
            out.checks.push(Check::new("appell.random_bounds", pass, format!("{failures} failures, identity {identity:.3e}")));
        }
        out.tables.push(rt);

        let mut ct = table(TABLES, "appell_closure");
        let mut it = table(TABLES, "appell_identity");
        if spec.closure {
            let setup = ClosureSetup { gamma: spec.gamma, ..ClosureSetup::default() };
            let mut plot = PlotData::new("appell_closure.dat", &["dt", "residual"]);
            for (j, triple) in standard_triples().iter().enumerate() {
                let study = closure_study(triple, &setup, spec.levels)?;
                let pass = study.min_order() >= MIN_CLOSURE_ORDER;
                for (k, lv) in study.levels.iter().enumerate() {
                    let order: Cell = if k == 0 { Cell::Empty } else { study.orders[k - 1].into() };
                    ct.push(vec![
                        j.into(),
                        k.into(),
                        lv.points.into(),
                        lv.dt.into(),
                        lv.residual.into(),
                        lv.relative.into(),
                        order,
                        pass.into(),
                    ]);
                    if j == 0 {
                        plot.rows.push(vec![lv.dt, lv.residual]);
                    }
                }
                out.checks.push(Check::new(format!("appell.closure_{j}"), pass, format!("min order {:.4}", study.min_order())));
            }
            out.plots.push(plot);

            // alpha = beta: the time change and the dilation are both trivial
            let slices = 101;
            let traj = GaussianPacket::standard().trajectory(&ctx.grid, 0.0, 0.01, slices)?;
            let params = AppellParams::general(1.7, 1.7)?;
            let image = appell_transform(&traj, &params, Direction::Forward, &ctx.grid, TimeSamples::new(0.0, 0.01, slices))?;
            let diff = (0..slices).map(|k| image.field(k).max_abs_diff(traj.field(k))).fold(0.0, f64::max);
            let pass = diff <= IDENTITY_TOLERANCE;
            it.push(vec![1.7.into(), slices.into(), diff.into(), pass.into()]);
            out.checks.push(Check::new("appell.identity", pass, format!("max difference {diff:.3e}")));
        }
        out.tables.push(ct);
        out.tables.push(it);
        Ok(out)
    }
}
