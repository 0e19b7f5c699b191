use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("inclusion radius {0} outside the admissible range")]
    RadiusOutOfRange(f64),
    #[error("angular resolution {0} must be a positive multiple of 8")]
    AngularResolution(usize),
    #[error("radial resolution {0} must be at least 2")]
    RadialResolution(usize),
    #[error("triangle {triangle} degenerated (signed area {area:e}); rebuild the mesh")]
    DegenerateTriangle { triangle: usize, area: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("conjugate gradient stalled after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("operator is not positive definite along a search direction")]
    Indefinite,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CellError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("cell solve failed: {0}")]
    Solve(#[from] SolveError),
    #[error("boundary load violates compatibility: |integral of e_{direction}.n| = {value:e}")]
    Compatibility { direction: usize, value: f64 },
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("cell problem at r = {radius} failed: {source}")]
    CellSolve { radius: f64, source: CellError },
    #[error("table invariant violated: {0}")]
    Invariant(String),
    #[error("malformed table file at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("time step {dt:e} exceeds the explicit stability limit {limit:e}")]
    Stability { dt: f64, limit: f64 },
    #[error("non-finite value in field {field} at grid index {index} (t = {t})")]
    NonFinite { field: String, index: usize, t: f64 },
    #[error("Picard iteration did not converge in {iterations} iterations (last increment {increment:e})")]
    PicardDiverged { iterations: usize, increment: f64 },
    #[error("linear solve failed: {0}")]
    Solve(#[from] SolveError),
    #[error("state shape does not match the grid: {0}")]
    Shape(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("history does not cover [0, {requested}]: {reason}")]
    HistoryGap { requested: f64, reason: String },
    #[error("inconsistent analysis box: {0}")]
    InconsistentBox(String),
    #[error("radius margins are void at t = 0: {0}")]
    VoidMargins(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("field contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("field has {got} values, expected {expected}")]
    Shape { got: usize, expected: usize },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed snapshot {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("invariant monitor aborted the run at t = {t}: {reason}")]
    MonitorAbort { t: f64, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Render(#[from] RenderError),
}

/// Coarse failure class of a run, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Config,
    Numerical,
    Io,
}

impl RunError {
    pub fn kind(&self) -> FailureKind {
        match self {
            RunError::Config(ConfigError::Io { .. }) => FailureKind::Io,
            RunError::Config(_) => FailureKind::Config,
            RunError::Step(StepError::Stability { .. }) | RunError::Step(StepError::Shape(_)) => {
                FailureKind::Config
            }
            RunError::Step(_) | RunError::MonitorAbort { .. } => FailureKind::Numerical,
            RunError::Table(TableError::Io { .. }) => FailureKind::Io,
            RunError::Table(TableError::CellSolve { .. }) => FailureKind::Numerical,
            RunError::Table(_) => FailureKind::Config,
            RunError::Io { .. } => FailureKind::Io,
            RunError::Render(RenderError::Io { .. }) => FailureKind::Io,
            RunError::Render(RenderError::NonFinite(_)) => FailureKind::Numerical,
            RunError::Render(_) => FailureKind::Config,
        }
    }
}
