//! Analyses selectable by name.
//!
//! Each analysis owns one scenario block, validates it before any solve, and
//! turns the shared stored trajectory (or its own runs) into fixed-column
//! tables, plot data and pass/fail checks.

use std::sync::Arc;

use obslab_core::grid::{Grid, Trajectory, WaveField};
use obslab_core::propagator::PotentialSpec;

use crate::config::{Scenario, Source, Violation};
use crate::error::CliError;
use crate::output::{Check, PlotData, Table};

mod appell;
mod carleman;
mod chain;
mod mass;
mod observe;
mod simulate;

pub use appell::AppellAnalysis;
pub use carleman::CarlemanAnalysis;
pub use chain::ChainAnalysis;
pub use mass::MassAnalysis;
pub use observe::ObserveAnalysis;
pub use simulate::SimulateAnalysis;

/// Everything an analysis may read.
pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub grid: Arc<Grid>,
    pub initial: WaveField,
    pub potential: PotentialSpec,
    /// The shared solve, present when some selected analysis needs it.
    pub trajectory: Option<&'a Trajectory>,
    pub seed: u64,
}

impl Context<'_> {
    pub fn trajectory(&self) -> Result<&Trajectory, CliError> {
        self.trajectory.ok_or_else(|| CliError::Usage("analysis needs the shared solve".into()))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub plots: Vec<PlotData>,
}

/// Name and fixed column set of a table an analysis emits.
pub type TableSpec = (&'static str, &'static [&'static str]);

pub trait Analysis: Send + Sync {
    /// Operation name, also the scenario block and subcommand stem.
    fn name(&self) -> &'static str;
    /// Every table this analysis can emit; the first one is what a sweep collects.
    fn tables(&self) -> &'static [TableSpec];
    fn enabled(&self, scenario: &Scenario) -> bool;
    /// Precondition violations of the block; `grid` is absent when the grid itself is invalid.
    fn validate(&self, scenario: &Scenario, source: &Source, grid: Option<&Grid>) -> Vec<Violation>;
    fn needs_solve(&self) -> bool;
    fn run(&self, ctx: &Context) -> Result<Outcome, CliError>;
}

/// Empty table with the declared columns of `name`.
pub(crate) fn table(specs: &'static [TableSpec], name: &str) -> Table {
    let (n, cols) = specs.iter().find(|(n, _)| *n == name).expect("declared table");
    Table::new(*n, cols)
}

pub(crate) fn violation(source: &Source, section: &str, key: &str, message: impl Into<String>) -> Violation {
    Violation { line: source.line_of(section, key), message: message.into() }
}

/// Name-indexed analyses, in the order a full run executes them.
pub struct AnalysisRegistry {
    entries: Vec<Box<dyn Analysis>>,
}

impl AnalysisRegistry {
    pub fn empty() -> Self {
        AnalysisRegistry { entries: Vec::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(SimulateAnalysis));
        r.register(Box::new(ObserveAnalysis));
        r.register(Box::new(MassAnalysis));
        r.register(Box::new(ChainAnalysis));
        r.register(Box::new(AppellAnalysis));
        r.register(Box::new(CarlemanAnalysis));
        r
    }

    /// Adds `analysis`, replacing one of the same name in place.
    pub fn register(&mut self, analysis: Box<dyn Analysis>) {
        match self.entries.iter().position(|a| a.name() == analysis.name()) {
            Some(j) => self.entries[j] = analysis,
            None => self.entries.push(analysis),
        }
    }

    pub fn get(&self, name: &str) -> Option<&dyn Analysis> {
        self.entries.iter().find(|a| a.name() == name).map(|a| a.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|a| a.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Analysis> {
        self.entries.iter().map(|a| a.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_names_and_unique_tables() {
        let r = AnalysisRegistry::standard();
        assert_eq!(r.names(), vec!["simulate", "observe", "mass", "chain", "appell", "carleman"]);
        let mut all: Vec<&str> = r.iter().flat_map(|a| a.tables().iter().map(|t| t.0)).collect();
        let n = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), n);
        assert!(r.get("observe").is_some() && r.get("nothing").is_none());
    }
}
