use obslab_core::appell::ScalarFns;
use obslab_core::carleman::build_cutoffs;
use obslab_core::diagnostics::{admissible_gamma, proof_chain_diagnostics, ChainBound};
use obslab_core::grid::Grid;
use obslab_core::observability::compute_constants;
use obslab_core::propagator::{solve, PotentialSpec};

use super::{table, violation, Analysis, Context, Outcome, TableSpec};
use crate::config::{Scenario, Source, Violation};
use crate::error::CliError;
use crate::output::{Cell, Check};

/// Quantities of the lower-bound argument at one `gamma`.
///
/// The shared solve supplies the constants that fix the admissible `gamma`;
/// the chain then runs its own solve, resolved on the windows that `gamma`
/// selects.
pub struct ChainAnalysis;

const TABLES: &[TableSpec] = &[
    (
        "chain",
        &[
            "gamma", "gamma_min", "r0", "r", "c0", "a", "l", "c_n", "sigma", "b", "b_stated", "b_weighted", "b_ball", "b1",
            "b2", "i11", "i12", "i1", "i2", "a_local", "b1_rhs_local", "b2_rhs_local", "condition_2", "condition_3",
            "condition_4", "resolution_drift",
        ],
    ),
    ("chain_bounds", &["bound", "value", "rhs", "pass"]),
];

/// Steps across `[0, s(3/4)]` of the chain solve.
pub const CHAIN_STEPS: usize = 200;
/// The chain solve runs 5% past `s(3/4)`.
pub const CHAIN_OVERSHOOT_STEPS: usize = 10;

impl Analysis for ChainAnalysis {
    fn name(&self) -> &'static str {
        "chain"
    }

    fn tables(&self) -> &'static [TableSpec] {
        TABLES
    }

    fn enabled(&self, s: &Scenario) -> bool {
        s.chain.is_some()
    }

    fn validate(&self, s: &Scenario, src: &Source, _: Option<&Grid>) -> Vec<Violation> {
        let Some(c) = &s.chain else { return Vec::new() };
        let mut out = Vec::new();
        let mut bad = |key: &str, msg: String| out.push(violation(src, "chain", key, msg));
        if !(c.r0 > 0.0) {
            bad("r0", format!("R0 must be positive, got {}", c.r0));
        }
        if let Some(m) = c.m {
            if !(m >= 4.0 * c.r0 + 1.0) {
                bad("m", format!("M = {m} violates the observability hypothesis M >= 4 R0 + 1 = {}", 4.0 * c.r0 + 1.0));
            }
        }
        if !(c.c_n > 0.0) {
            bad("c_n", format!("c_n must be positive, got {}", c.c_n));
        }
        if let Some(g) = c.gamma {
            if !(g > 16.0) || !g.is_finite() {
                bad("gamma", format!("the scalar family requires gamma > 16, got {g}"));
            }
        } else if !(c.gamma_factor >= 1.0) {
            bad("gamma_factor", format!("gamma_factor below 1 is not admissible, got {}", c.gamma_factor));
        }
        if build_cutoffs(2.0, c.smoothness).is_err() {
            bad("smoothness", format!("unsupported smoothness order {}", c.smoothness));
        }
        out
    }

    fn needs_solve(&self) -> bool {
        true
    }

    fn run(&self, ctx: &Context) -> Result<Outcome, CliError> {
        let spec = ctx.scenario.chain.as_ref().ok_or_else(|| CliError::Usage("no [chain] block".into()))?;
        let probe = compute_constants(ctx.trajectory()?, &ctx.potential, spec.r0, spec.m)?;
        let gamma_min = admissible_gamma(&probe);
        let gamma = match (spec.gamma, gamma_min) {
            (Some(g), _) => g,
            (None, Some(g)) => spec.gamma_factor * g.max(16.0),
            (None, None) => return Err(CliError::Usage("zero initial mass in B_R0: set chain.gamma explicitly".into())),
        };
        let (_, s2b) = ScalarFns::new(gamma)?.interval_2();
        let dt = s2b / CHAIN_STEPS as f64;
        let traj = solve(&ctx.initial, &ctx.potential, &PotentialSpec::zero(), (CHAIN_STEPS + CHAIN_OVERSHOOT_STEPS) as f64 * dt, dt)?;
        let k = compute_constants(&traj, &ctx.potential, spec.r0, spec.m)?;
        let cut = build_cutoffs(spec.r0 * gamma.sqrt(), spec.smoothness)?;
        let r = proof_chain_diagnostics(&traj, &ctx.potential, gamma, &k, &cut, spec.c_n)?;

        let mut out = Outcome::default();
        let mut t = table(TABLES, "chain");
        t.push(vec![
            r.gamma.into(),
            gamma_min.into(),
            r.r0.into(),
            r.r.into(),
            k.c0.into(),
            r.a.into(),
            r.l.into(),
            r.c_n.into(),
            r.sigma.into(),
            r.b.into(),
            r.b_stated.into(),
            r.b_weighted.into(),
            r.b_ball.into(),
            r.b1.into(),
            r.b2.into(),
            r.i11.into(),
            r.i12.into(),
            r.i1.into(),
            r.i2.into(),
            r.a_local.into(),
            r.b1_rhs_local.into(),
            r.b2_rhs_local.into(),
            r.condition_2.into(),
            r.condition_3.into(),
            r.condition_4.into(),
            r.resolution_drift.into(),
        ]);
        out.tables.push(t);

        let mut bt = table(TABLES, "chain_bounds");
        let bounds: [(&str, Option<ChainBound>); 6] = [
            ("b1", Some(r.bound_b1)),
            ("b2", Some(r.bound_b2)),
            ("gamma_b", Some(r.bound_gamma_b)),
            ("i1", Some(r.bound_i1)),
            ("i2", Some(r.bound_i2)),
            ("initial_mass_floor", r.floor),
        ];
        for (name, b) in bounds {
            match b {
                Some(b) => {
                    bt.push(vec![name.into(), b.value.into(), b.rhs.into(), b.pass.into()]);
                    out.checks.push(Check::new(format!("chain.{name}"), b.pass, format!("{:.6e} <= {:.6e}", b.value, b.rhs)));
                }
                None => bt.push(vec![name.into(), Cell::Empty, Cell::Empty, Cell::Empty]),
            }
        }
        out.tables.push(bt);
        Ok(out)
    }
}
