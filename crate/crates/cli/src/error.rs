use thiserror::Error;

use crate::config::Violation;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid scenario:\n{}", list(.0))]
    Validation(Vec<Violation>),
    #[error(transparent)]
    Core(#[from] obslab_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(String),
    #[error("{0} check(s) failed")]
    Checks(usize),
    #[error("{0} analysis block(s) failed")]
    Runtime(usize),
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

impl CliError {
    /// 0 success, 1 validation, 2 runtime, 3 failed check.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Usage(_) => 1,
            CliError::Core(_) | CliError::Io(_) | CliError::Runtime(_) => 2,
            CliError::Checks(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
