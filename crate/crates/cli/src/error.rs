use std::path::Path;

use electroelastic::Error;

/// Process exit codes. Stable across releases.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const PRECONDITION: i32 = 4;
    pub const SOLVER_DIVERGED: i32 = 5;
    pub const IO: i32 = 6;
    pub const INFINITE_ENERGY: i32 = 7;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] Error),
    #[error("energy is infinite: {0}")]
    InfiniteEnergy(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Io { .. } => exit::IO,
            CliError::InfiniteEnergy(_) => exit::INFINITE_ENERGY,
            CliError::Core(e) => match e {
                Error::Io(_) | Error::Parse { .. } => exit::IO,
                Error::SolverDiverged { .. } => exit::SOLVER_DIVERGED,
                Error::InfeasibleStart(_) => exit::INFINITE_ENERGY,
                Error::InvalidArgument(_) | Error::NeedThreeRadii | Error::UnsupportedDimension(_) | Error::InvalidGrid(_) => {
                    exit::CONFIG
                }
                _ => exit::PRECONDITION,
            },
        }
    }
}
