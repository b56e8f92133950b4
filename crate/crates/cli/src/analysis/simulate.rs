use obslab_core::grid::Grid;
use obslab_core::propagator::edge_mass_fraction;

use super::{table, Analysis, Context, Outcome, TableSpec};
use crate::config::{Scenario, Source, Violation};
use crate::error::CliError;
use crate::output::PlotData;

/// Mass history of the shared solve and the final profile.
pub struct SimulateAnalysis;

const TABLES: &[TableSpec] = &[("simulate", &["t", "mass", "l2_norm", "edge_fraction"])];

impl Analysis for SimulateAnalysis {
    fn name(&self) -> &'static str {
        "simulate"
    }

    fn tables(&self) -> &'static [TableSpec] {
        TABLES
    }

    fn enabled(&self, _: &Scenario) -> bool {
        true
    }

    fn validate(&self, _: &Scenario, _: &Source, _: Option<&Grid>) -> Vec<Violation> {
        Vec::new()
    }

    fn needs_solve(&self) -> bool {
        true
    }

    fn run(&self, ctx: &Context) -> Result<Outcome, CliError> {
        let traj = ctx.trajectory()?;
        let mut t = table(TABLES, "simulate");
        let mut mass = PlotData::new("simulate_mass.dat", &["t", "mass"]);
        for f in traj.fields() {
            t.push(vec![f.time().into(), f.mass().into(), f.norm().into(), edge_mass_fraction(f).into()]);
            mass.rows.push(vec![f.time(), f.mass()]);
        }
        let last = traj.last();
        let grid = traj.grid();
        let profile = if grid.dim() == 1 {
            let mut p = PlotData::new("simulate_profile.dat", &["x", "re", "im"]);
            p.rows = last.values().iter().enumerate().map(|(i, v)| vec![grid.coord(i), v.re, v.im]).collect();
            p
        } else {
            let mut p = PlotData::new("simulate_profile.dat", &["x", "y", "density"]);
            p.rows = last
                .values()
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let x = grid.point(i);
                    vec![x[0], x[1], v.norm_sqr()]
                })
                .collect();
            p
        };
        Ok(Outcome { tables: vec![t], checks: Vec::new(), plots: vec![mass, profile] })
    }
}
