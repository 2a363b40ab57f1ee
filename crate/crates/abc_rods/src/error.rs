use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter coordinate {value} outside [-1, 1]")]
    OutOfDomain { value: f64 },

    #[error("degenerate element: {0}")]
    DegenerateElement(String),

    #[error("invalid section: {0}")]
    InvalidSection(String),

    #[error("closest-point projection did not converge after {iterations} iterations (residual {residual:.3e})")]
    ProjectionDiverged { iterations: usize, residual: f64 },

    #[error("closest-point projection is not unique (near-parallel curves, det {det:.3e})")]
    ProjectionNotUnique { det: f64 },

    #[error("invalid penalty law: {0}")]
    InvalidPenaltyLaw(String),

    #[error("invalid contact configuration: {0}")]
    InvalidContactConfig(String),

    #[error("distributed moment not perpendicular to centerline tangent (|t.m| = {dot:.3e})")]
    MomentNotPerpendicular { dot: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (|R| = {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("time step size fell below the minimum {min:.3e} after repeated halving")]
    StepSizeUnderflow { min: f64 },

    #[error("penetration guard tripped: gap {gap:.3e} below limit {limit:.3e}")]
    PenetrationGuard { gap: f64, limit: f64 },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
