use obslab_core::carleman::build_cutoffs;
use obslab_core::diagnostics::{mass_identity_residual, MassWeight};
use obslab_core::grid::Grid;
use obslab_core::propagator::{solve_with, PotentialSpec, SolveOptions};

use super::{table, violation, Analysis, Context, Outcome, TableSpec};
use crate::config::{MassSpec, Scenario, Source, Violation};
use crate::error::CliError;
use crate::output::{Cell, Check, PlotData};

/// Defect of the integrated mass identity, optionally under `dt` halving.
pub struct MassAnalysis;

const TABLES: &[TableSpec] =
    &[("mass", &["dt", "t", "residual", "residual_stated", "change", "flux", "ratio", "pass"])];

/// Accepted residual ratio per halving of `dt` for a second-order solver.
pub const RATIO_RANGE: (f64, f64) = (3.4, 4.6);
const MAX_HALVINGS: u32 = 6;

fn weight(spec: &MassSpec) -> Result<MassWeight, CliError> {
    match spec.weight.as_str() {
        "pointwise" => Ok(MassWeight::Pointwise),
        "whole_box" => Ok(MassWeight::WholeBox),
        "radial" => {
            let r = spec.r.ok_or_else(|| CliError::Usage("radial weight needs r".into()))?;
            Ok(MassWeight::Radial(build_cutoffs(r, 4)?))
        }
        w => Err(CliError::Usage(format!("unknown weight `{w}`"))),
    }
}

impl Analysis for MassAnalysis {
    fn name(&self) -> &'static str {
        "mass"
    }

    fn tables(&self) -> &'static [TableSpec] {
        TABLES
    }

    fn enabled(&self, s: &Scenario) -> bool {
        s.mass.is_some()
    }

    fn validate(&self, s: &Scenario, src: &Source, _: Option<&Grid>) -> Vec<Violation> {
        let Some(m) = &s.mass else { return Vec::new() };
        let mut out = Vec::new();
        match m.weight.as_str() {
            "pointwise" | "whole_box" => {}
            "radial" => {
                if !m.r.is_some_and(|r| r >= 2.0) {
                    out.push(violation(src, "mass", "r", "the radial weight needs a cutoff radius r of at least 2"));
                }
            }
            w => out.push(violation(src, "mass", "weight", format!("unknown weight `{w}`; known: pointwise, whole_box, radial"))),
        }
        if m.halvings > MAX_HALVINGS {
            out.push(violation(src, "mass", "halvings", format!("at most {MAX_HALVINGS} halvings, got {}", m.halvings)));
        }
        if let Some(tol) = m.tolerance {
            if !(tol > 0.0) {
                out.push(violation(src, "mass", "tolerance", format!("tolerance must be positive, got {tol}")));
            }
        }
        out
    }

    fn needs_solve(&self) -> bool {
        true
    }

    fn run(&self, ctx: &Context) -> Result<Outcome, CliError> {
        let spec = ctx.scenario.mass.as_ref().ok_or_else(|| CliError::Usage("no [mass] block".into()))?;
        let w = weight(spec)?;
        let base = ctx.trajectory()?;
        let t = base.t_end();
        let time = ctx.scenario.time;
        let mut reports = vec![(time.dt, mass_identity_residual(base, &ctx.potential, &w, t)?)];
        for k in 1..=spec.halvings {
            let dt = time.dt / f64::from(1u32 << k);
            let opts = SolveOptions::new(time.t_end, dt).with_stride(time.stride);
            let traj = solve_with(&ctx.initial, &ctx.potential, &PotentialSpec::zero(), opts)?;
            reports.push((dt, mass_identity_residual(&traj, &ctx.potential, &w, t)?));
        }
        let mut out = Outcome::default();
        let mut tab = table(TABLES, "mass");
        let mut plot = PlotData::new("mass_residual.dat", &["dt", "residual", "residual_stated"]);
        for (j, (dt, r)) in reports.iter().enumerate() {
            let (ratio, pass) = if j == 0 {
                (Cell::Empty, spec.tolerance.map(|tol| r.residual <= tol))
            } else {
                let q = reports[j - 1].1.residual / r.residual;
                (q.into(), Some((RATIO_RANGE.0..=RATIO_RANGE.1).contains(&q)))
            };
            if let Some(p) = pass {
                let detail = match j {
                    0 => format!("residual {:.3e} against tolerance {:.3e}", r.residual, spec.tolerance.unwrap_or(0.0)),
                    _ => format!("ratio {:.4} at dt = {dt:e}", reports[j - 1].1.residual / r.residual),
                };
                out.checks.push(Check::new(format!("mass.level_{j}"), p, detail));
            }
            tab.push(vec![
                (*dt).into(),
                r.t.into(),
                r.residual.into(),
                r.residual_stated.into(),
                r.change.into(),
                r.flux.into(),
                ratio,
                pass.into(),
            ]);
            plot.rows.push(vec![*dt, r.residual, r.residual_stated]);
        }
        out.tables.push(tab);
        out.plots.push(plot);
        Ok(out)
    }
}
