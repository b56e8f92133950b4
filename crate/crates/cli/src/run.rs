//! Validation, the shared solve, block execution and result persistence.

use std::path::Path;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use obslab_core::grid::{make_grid, Grid, Trajectory, WaveField};
use obslab_core::propagator::{param_or, solve_with, GaussianPacket, PotentialSpec, SolveOptions, SpaceTimeRegistry, SpaceTimeSpec};
use obslab_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::analysis::{Analysis, AnalysisRegistry, Context, Outcome};
use crate::config::{self, InitialSpec, PacketSpec, Scenario, Source, Violation};
use crate::error::CliError;
use crate::output::{gnuplot_script, write_plot, write_table, Check, PlotData, Provenance, Table};

/// Code version recorded with every run.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Replaces the scenario seed.
    pub seed: Option<u64>,
    /// Runs only this analysis; `None` runs every block present.
    pub only: Option<String>,
}

/// Standard potentials plus `random_wells` (`count`, `scale`, `stream`): a
/// sum of modulated Gaussian wells drawn from the scenario seed.
pub fn potential_registry(seed: u64) -> SpaceTimeRegistry {
    let mut r = SpaceTimeRegistry::standard();
    r.register("random_wells", &["count", "scale", "stream"], move |p| {
        let count = param_or(p, "count", 3.0);
        if !(count >= 1.0) || count.fract() != 0.0 {
            return Err(obslab_core::Error::Domain(format!("count must be a positive integer, got {count}")));
        }
        let scale = param_or(p, "scale", 1.0);
        let stream = param_or(p, "stream", 0.0) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let parts = (0..count as usize)
            .map(|_| {
                let amp = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5)) * scale;
                let width = rng.random_range(1.0..3.0);
                let freq = rng.random_range(0.0..4.0);
                let c = rng.random_range(-2.0..2.0);
                SpaceTimeSpec::gaussian_well_at(amp, width, freq, [c, 0.0])
            })
            .collect();
        Ok(SpaceTimeSpec::sum(parts))
    });
    r
}

fn packet(p: &PacketSpec) -> Result<GaussianPacket, obslab_core::Error> {
    Ok(GaussianPacket::new(p.center, p.width, p.momentum)?.with_amplitude(p.amplitude))
}

fn read_initial_file(path: &Path, grid: &Arc<Grid>) -> Result<WaveField, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let values = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|l| {
            let mut it = l.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(re)), Some(Ok(im)), None) => Ok(C64::new(re, im)),
                _ => Err(CliError::Io(format!("{}: malformed line `{l}`", path.display()))),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(WaveField::new(grid.clone(), values, 0.0)?)
}

/// Initial data on `grid`; relative file paths resolve against `base`.
pub fn build_initial(spec: &InitialSpec, grid: &Arc<Grid>, base: &Path) -> Result<WaveField, CliError> {
    match spec {
        InitialSpec::Gaussian { center, width, momentum, amplitude } => {
            let p = PacketSpec { center: *center, width: *width, momentum: *momentum, amplitude: *amplitude };
            Ok(packet(&p)?.field(grid, 0.0)?)
        }
        InitialSpec::Sum { parts } => {
            let mut acc = vec![C64::new(0.0, 0.0); grid.len()];
            for p in parts {
                for (a, v) in acc.iter_mut().zip(packet(p)?.field(grid, 0.0)?.values()) {
                    *a += v;
                }
            }
            Ok(WaveField::new(grid.clone(), acc, 0.0)?)
        }
        InitialSpec::File { path } => read_initial_file(&base.join(path), grid),
    }
}

pub fn build_potential(s: &Scenario, registry: &SpaceTimeRegistry) -> Result<PotentialSpec, CliError> {
    let terms: Vec<(String, _)> = s.potential.iter().map(|t| (t.kind.clone(), config::term_params(t))).collect();
    Ok(registry.build_sum(&terms)?)
}

fn selected<'a>(s: &Scenario, analyses: &'a AnalysisRegistry, only: Option<&str>) -> Vec<&'a dyn Analysis> {
    analyses.iter().filter(|a| a.enabled(s) && only.is_none_or(|o| o == a.name())).collect()
}

/// All precondition violations of the scenario and its selected blocks.
pub fn validate(
    s: &Scenario,
    src: &Source,
    analyses: &AnalysisRegistry,
    potentials: &SpaceTimeRegistry,
    only: Option<&str>,
    base: &Path,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let at = |section: &str, key: &str, msg: String| Violation { line: src.line_of(section, key), message: msg };
    if s.name.trim().is_empty() {
        out.push(at("", "name", "scenario name must not be empty".into()));
    }
    let grid = match make_grid(s.grid.dim, s.grid.half_width, s.grid.points) {
        Ok(g) => Some(g),
        Err(e) => {
            out.push(at("grid", "points", e.to_string()));
            None
        }
    };
    let t = s.time;
    let steps = (t.t_end / t.dt).round();
    if !(t.dt > 0.0) || !(t.t_end > 0.0) {
        out.push(at("time", "dt", format!("dt and t_end must be positive, got {} and {}", t.dt, t.t_end)));
    } else if steps < 1.0 || (steps * t.dt - t.t_end).abs() > 1e-9 * t.t_end {
        out.push(at("time", "dt", format!("dt = {} does not divide t_end = {}", t.dt, t.t_end)));
    } else if t.stride == 0 || !(steps as usize).is_multiple_of(t.stride) {
        out.push(at("time", "stride", format!("stride {} does not divide the {steps} steps", t.stride)));
    }
    match &s.initial {
        InitialSpec::Gaussian { width, .. } if !(*width > 0.0) => {
            out.push(at("initial", "width", format!("packet width must be positive, got {width}")))
        }
        InitialSpec::Sum { parts } if parts.is_empty() || parts.iter().any(|p| !(p.width > 0.0)) => {
            out.push(at("initial", "parts", "a sum needs at least one packet, each with positive width".into()))
        }
        InitialSpec::File { path } => {
            if let Some(g) = &grid {
                if let Err(e) = read_initial_file(&base.join(path), g) {
                    out.push(at("initial", "path", e.to_string()));
                }
            }
        }
        _ => {}
    }
    for (j, term) in s.potential.iter().enumerate() {
        let line = src.line_of_nth("potential", j, "kind");
        if !potentials.contains(&term.kind) {
            out.push(Violation {
                line,
                message: format!("unknown potential kind `{}`; known: {}", term.kind, potentials.names().join(", ")),
            });
        } else if let Err(e) = potentials.build(&term.kind, &config::term_params(term)) {
            out.push(Violation { line, message: format!("potential `{}`: {e}", term.kind) });
        }
    }
    if let Some(o) = only {
        match analyses.get(o) {
            None => out.push(Violation { line: None, message: format!("unknown analysis `{o}`") }),
            Some(a) if !a.enabled(s) => {
                out.push(Violation { line: None, message: format!("scenario has no [{o}] block") })
            }
            _ => {}
        }
    }
    for a in selected(s, analyses, only) {
        out.extend(a.validate(s, src, grid.as_deref()));
    }
    out
}

/// Result of one analysis block.
#[derive(Debug)]
pub struct BlockResult {
    pub analysis: &'static str,
    pub outcome: Result<Outcome, String>,
    pub seconds: f64,
}

#[derive(Debug)]
pub struct RunReport {
    pub provenance: Provenance,
    pub seed: u64,
    pub blocks: Vec<BlockResult>,
    pub solve_seconds: f64,
    pub started: f64,
    pub finished: f64,
}

impl RunReport {
    pub fn tables(&self) -> impl Iterator<Item = (&'static str, &Table)> {
        self.blocks.iter().filter_map(|b| b.outcome.as_ref().ok().map(|o| (b.analysis, o))).flat_map(|(a, o)| o.tables.iter().map(move |t| (a, t)))
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables().map(|(_, t)| t).find(|t| t.name == name)
    }

    pub fn checks(&self) -> impl Iterator<Item = &Check> {
        self.blocks.iter().filter_map(|b| b.outcome.as_ref().ok()).flat_map(|o| o.checks.iter())
    }

    pub fn plots(&self) -> impl Iterator<Item = &PlotData> {
        self.blocks.iter().filter_map(|b| b.outcome.as_ref().ok()).flat_map(|o| o.plots.iter())
    }

    pub fn errors(&self) -> impl Iterator<Item = (&'static str, &str)> {
        self.blocks.iter().filter_map(|b| b.outcome.as_ref().err().map(|e| (b.analysis, e.as_str())))
    }

    /// Runtime errors take precedence over failed checks.
    pub fn status(&self) -> Result<(), CliError> {
        let errors = self.errors().count();
        if errors > 0 {
            return Err(CliError::Runtime(errors));
        }
        let failed = self.checks().filter(|c| !c.pass).count();
        if failed > 0 {
            return Err(CliError::Checks(failed));
        }
        Ok(())
    }
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Validates, solves once if any selected block needs it, then runs every
/// selected block; a failing block is recorded without stopping the others.
pub fn run(
    scenario: &Scenario,
    source: &Source,
    opts: &RunOptions,
    analyses: &AnalysisRegistry,
    base: &Path,
) -> Result<RunReport, CliError> {
    let started = now();
    let seed = opts.seed.unwrap_or(scenario.seed);
    let potentials = potential_registry(seed);
    let only = opts.only.as_deref();
    let violations = validate(scenario, source, analyses, &potentials, only, base);
    if !violations.is_empty() {
        return Err(CliError::Validation(violations));
    }
    let grid = make_grid(scenario.grid.dim, scenario.grid.half_width, scenario.grid.points)?;
    let initial = build_initial(&scenario.initial, &grid, base)?;
    let potential = build_potential(scenario, &potentials)?;
    let blocks = selected(scenario, analyses, only);

    let clock = Instant::now();
    let solved: Option<Result<Trajectory, String>> = blocks.iter().any(|a| a.needs_solve()).then(|| {
        let t = scenario.time;
        let opts = SolveOptions::new(t.t_end, t.dt).with_stride(t.stride);
        solve_with(&initial, &potential, &PotentialSpec::zero(), opts).map_err(|e| format!("solve: {e}"))
    });
    let solve_seconds = clock.elapsed().as_secs_f64();

    let ctx = Context {
        scenario,
        grid,
        initial,
        potential,
        trajectory: solved.as_ref().and_then(|r| r.as_ref().ok()),
        seed,
    };
    let results = blocks
        .iter()
        .map(|a| {
            let clock = Instant::now();
            let outcome = match (&solved, a.needs_solve()) {
                (Some(Err(e)), true) => Err(e.clone()),
                _ => a.run(&ctx).map_err(|e| e.to_string()),
            };
            BlockResult { analysis: a.name(), outcome, seconds: clock.elapsed().as_secs_f64() }
        })
        .collect();
    Ok(RunReport {
        provenance: Provenance { scenario: scenario.name.clone(), config_hash: source.hash() },
        seed,
        blocks: results,
        solve_seconds,
        started,
        finished: now(),
    })
}

/// Loads and runs the scenario at `path`.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunReport, CliError> {
    let (scenario, source) = config::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    run(&scenario, &source, opts, &AnalysisRegistry::standard(), base)
}

/// Writes every table as CSV and JSON, the plot data, the block errors and a
/// `meta.json` sidecar; only the sidecar carries timestamps and wall times.
pub fn write_report(dir: &Path, report: &RunReport, gnuplot: bool, threads: usize) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    for (op, t) in report.tables() {
        write_table(dir, t, op, &report.provenance)?;
    }
    let errors: Vec<_> = report.errors().collect();
    if !errors.is_empty() {
        let mut t = Table::new("errors", &["block", "message"]);
        for (b, e) in &errors {
            t.push(vec![(*b).into(), (*e).into()]);
        }
        write_table(dir, &t, "run", &report.provenance)?;
    }
    let plots: Vec<PlotData> = report.plots().cloned().collect();
    for p in &plots {
        write_plot(dir, p)?;
    }
    if gnuplot && !plots.is_empty() {
        std::fs::write(dir.join("plot.gp"), gnuplot_script(&plots))?;
    }
    let meta = json!({
        "scenario": report.provenance.scenario,
        "config_hash": report.provenance.config_hash,
        "version": VERSION,
        "seed": report.seed,
        "threads": threads,
        "started_unix": report.started,
        "finished_unix": report.finished,
        "solve_seconds": report.solve_seconds,
        "blocks": report.blocks.iter().map(|b| json!({
            "analysis": b.analysis,
            "seconds": b.seconds,
            "error": b.outcome.as_ref().err(),
        })).collect::<Vec<_>>(),
        "checks": report.checks().map(|c| json!({ "name": c.name, "pass": c.pass, "detail": c.detail })).collect::<Vec<_>>(),
    });
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta).map_err(|e| CliError::Io(e.to_string()))? + "\n")?;
    Ok(())
}
