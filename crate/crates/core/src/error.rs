use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library. Each variant is a distinct failure class so
/// front ends can map them onto stable exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("masks or fields live on different grids")]
    GridMismatch,
    #[error("set is empty")]
    EmptySet,
    #[error("thickened set touches the outermost grid layer")]
    BoundaryClipped,
    #[error("ball radius {r0} is smaller than the grid spacing {h}")]
    RadiusTooSmall { r0: f64, h: f64 },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("reference element {element} has zero volume")]
    DegenerateElement { element: usize },
    #[error("deformation is inadmissible: element {element} has det = {det}")]
    Inadmissible { element: usize, det: f64 },
    #[error("deformed image leaves the grid bounding box")]
    OutOfBounds,
    #[error("degenerate capacity problem: {0}")]
    DegenerateSeparation(String),
    #[error("linear solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },
    #[error("self-capacity extrapolation needs at least three truncation radii")]
    NeedThreeRadii,
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),
    #[error("level {level} features fall below grid resolution; max admissible level is {max_level:?}")]
    FeatureBelowResolution { level: usize, max_level: Option<usize> },
    #[error("starting configuration has infinite energy: {0}")]
    InfeasibleStart(Reason),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Machine-readable reason attached to an infinite energy value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    Inadmissible,
    OutOfBounds,
    DegenerateSeparation,
    SolverDiverged,
    Overlap,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Inadmissible => "inadmissible",
            Reason::OutOfBounds => "out_of_bounds",
            Reason::DegenerateSeparation => "degenerate_separation",
            Reason::SolverDiverged => "solver_diverged",
            Reason::Overlap => "overlap",
        }
    }

    /// Classifies an error into a reason, if the error is one that turns an
    /// energy evaluation into `+inf` rather than aborting it.
    pub fn from_error(err: &Error) -> Option<Reason> {
        match err {
            Error::Inadmissible { .. } | Error::DegenerateElement { .. } => Some(Reason::Inadmissible),
            Error::OutOfBounds => Some(Reason::OutOfBounds),
            Error::DegenerateSeparation(_) | Error::EmptySet => Some(Reason::DegenerateSeparation),
            Error::SolverDiverged { .. } => Some(Reason::SolverDiverged),
            _ => None,
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
