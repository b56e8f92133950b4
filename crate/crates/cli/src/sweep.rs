//! One scenario run per value of a numeric parameter, aggregated in input order.

use std::path::Path;

use rayon::prelude::*;

use crate::analysis::AnalysisRegistry;
use crate::config::{self, Source};
use crate::error::CliError;
use crate::output::{Cell, Provenance, Table};
use crate::run::{run, RunOptions};

/// Columns placed before and after the collected table's own columns.
pub const SWEEP_LEAD: [&str; 3] = ["axis", "value", "value_hash"];
pub const SWEEP_TAIL: [&str; 1] = ["error"];

#[derive(Debug)]
pub struct SweepResult {
    pub analysis: &'static str,
    pub provenance: Provenance,
    pub table: Table,
}

/// The analysis a sweep collects: `analysis` if given, else the block the
/// axis lives in, else `simulate`.
pub fn sweep_analysis<'a>(registry: &'a AnalysisRegistry, axis: &str, analysis: Option<&str>) -> Result<&'a dyn crate::analysis::Analysis, CliError> {
    let name = analysis.unwrap_or_else(|| {
        let head = axis.split('.').next().unwrap_or("");
        if registry.get(head).is_some() {
            head
        } else {
            "simulate"
        }
    });
    registry.get(name).ok_or_else(|| CliError::Usage(format!("unknown analysis `{name}`; known: {}", registry.names().join(", "))))
}

fn flatten(msg: &str) -> String {
    msg.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join("; ")
}

/// Runs the scenario once per value with `axis` overridden. A value whose
/// run fails contributes one row carrying the error; the others continue.
pub fn sweep(
    text: &str,
    base: &Path,
    axis: &str,
    values: &[f64],
    analysis: Option<&str>,
    seed: Option<u64>,
) -> Result<SweepResult, CliError> {
    let registry = AnalysisRegistry::standard();
    let scenario = config::parse(text)?;
    let target = sweep_analysis(&registry, axis, analysis)?;
    let (table_name, inner) = target.tables()[0];
    let columns: Vec<&'static str> = SWEEP_LEAD.iter().chain(inner.iter()).chain(SWEEP_TAIL.iter()).copied().collect();
    // a bad axis is a usage error for the whole sweep, not a per-value failure
    config::override_value(text, axis, values.first().copied().unwrap_or(0.0))?;
    let opts = RunOptions { seed, only: Some(target.name().to_string()) };

    let per_value: Vec<Vec<Vec<Cell>>> = values
        .par_iter()
        .map(|&v| {
            let lead = |hash: Cell| vec![Cell::text(axis), v.into(), hash];
            let blank = |hash: Cell, err: String| {
                let mut row = lead(hash);
                row.extend(std::iter::repeat_n(Cell::Empty, inner.len()));
                row.push(Cell::Text(flatten(&err)));
                vec![row]
            };
            let text = match config::override_value(text, axis, v) {
                Ok(t) => t,
                Err(e) => return blank(Cell::Empty, e.to_string()),
            };
            let source = Source { text };
            let hash = Cell::Text(source.hash());
            let outcome = config::parse(&source.text).and_then(|s| run(&s, &source, &opts, &registry, base));
            match outcome {
                Err(e) => blank(hash, e.to_string()),
                Ok(report) => {
                    if let Some((_, e)) = report.errors().next() {
                        return blank(hash, e.to_string());
                    }
                    match report.table(table_name) {
                        Some(t) if !t.rows.is_empty() => t
                            .rows
                            .iter()
                            .map(|r| {
                                let mut row = lead(hash.clone());
                                row.extend(r.iter().cloned());
                                row.push(Cell::Empty);
                                row
                            })
                            .collect(),
                        _ => blank(hash, format!("no `{table_name}` rows")),
                    }
                }
            }
        })
        .collect();

    let mut table = Table { name: format!("sweep_{}", target.name()), columns, rows: Vec::new() };
    for rows in per_value {
        table.rows.extend(rows);
    }
    Ok(SweepResult {
        analysis: target.name(),
        provenance: Provenance { scenario: scenario.name, config_hash: Source { text: text.to_string() }.hash() },
        table,
    })
}
