use thiserror::Error;

/// Invalid or inconsistent input, detected before any time step is taken.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("[{section}] {msg}")]
    Invalid { section: String, msg: String },
}

impl ConfigError {
    pub fn invalid(section: &str, msg: impl Into<String>) -> Self {
        Self::Invalid { section: section.to_string(), msg: msg.into() }
    }

    pub fn syntax(line: usize, msg: impl Into<String>) -> Self {
        Self::Syntax { line, msg: msg.into() }
    }
}

/// Failure inside a time step.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("state left the invariant region by {excess:.3e} ({what}) in cell {cell}")]
    InvariantViolation { what: &'static str, cell: isize, excess: f64 },
    #[error("Newton iteration did not converge in {iterations} steps (residual {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("zero pivot in tridiagonal solve at row {row}")]
    SingularPivot { row: usize },
    #[error("boundary flux points into the tank at face {face} ({value:.3e}); refine the grid")]
    InwardBoundaryFlux { face: isize, value: f64 },
    #[error("concentration {x} too close to the solids density")]
    NearSolidDensity { x: f64 },
    #[error("non-finite value produced in cell {cell}")]
    NonFinite { cell: isize },
}

/// A step error annotated with where it happened.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("at t = {t:.3} s (stage {stage}): {source}")]
pub struct SimulationError {
    pub t: f64,
    pub stage: usize,
    #[source]
    pub source: StepError,
}

/// Anything that can stop a run.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
}
