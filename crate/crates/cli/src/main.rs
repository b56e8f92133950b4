use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use obslab_cli::output::write_table;
use obslab_cli::run::{run_file, write_report, RunOptions};
use obslab_cli::sweep::sweep;
use obslab_cli::CliError;

#[derive(Parser)]
#[command(name = "obslab", version, about = "Run observability and Carleman scenarios")]
struct Cli {
    /// Scenario file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to `results/<scenario name>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write a gnuplot script for the plot data.
    #[arg(long, global = true)]
    gnuplot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once and run every analysis block present.
    Simulate,
    /// Time-change bounds, closure study and identity case.
    AppellCheck,
    /// Operator algebra, commutator refinement and constant calibration.
    CarlemanCheck,
    /// J tables, decay fit, held-out lower bound and probes.
    Observe,
    /// Mass identity defect.
    MassCheck,
    /// Quantities of the lower-bound argument.
    ChainCheck,
    /// One run per value of a numeric parameter.
    Sweep {
        /// Dotted path of the parameter, e.g. `observe.rho`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; may be empty.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        /// Analysis whose first table is collected.
        #[arg(long)]
        analysis: Option<String>,
    },
}

fn only(cmd: &Command) -> Option<&'static str> {
    match cmd {
        Command::Simulate | Command::Sweep { .. } => None,
        Command::AppellCheck => Some("appell"),
        Command::CarlemanCheck => Some("carleman"),
        Command::Observe => Some("observe"),
        Command::MassCheck => Some("mass"),
        Command::ChainCheck => Some("chain"),
    }
}

fn out_dir(cli: &Cli, scenario: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| Path::new("results").join(scenario))
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let threads = cli.threads.unwrap_or_else(rayon::current_num_threads);
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let path = cli.config.as_deref().ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    if let Command::Sweep { axis, values, analysis } = &cli.command {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let res = sweep(&text, base, axis, values, analysis.as_deref(), cli.seed)?;
        let dir = out_dir(cli, &res.provenance.scenario);
        std::fs::create_dir_all(&dir)?;
        write_table(&dir, &res.table, "sweep", &res.provenance)?;
        let failed = res.table.rows.iter().filter(|r| !matches!(r.last(), Some(obslab_cli::output::Cell::Empty))).count();
        println!("{} rows ({failed} with errors) -> {}", res.table.rows.len(), dir.join(format!("{}.csv", res.table.name)).display());
        return Ok(());
    }
    let opts = RunOptions { seed: cli.seed, only: only(&cli.command).map(str::to_string) };
    let report = run_file(path, &opts)?;
    let dir = out_dir(cli, &report.provenance.scenario);
    write_report(&dir, &report, cli.gnuplot, threads)?;
    for c in report.checks() {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for (block, e) in report.errors() {
        eprintln!("ERROR {block}: {e}");
    }
    println!("results -> {}", dir.display());
    report.status()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
