use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("kernel check failed: {0}")]
    KernelCheck(String),
    #[error("no observations with treatment level {z} and instrument level {w}")]
    EmptyCell { z: usize, w: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no in-cell observation has kernel mass at x = {x}")]
    ZeroMass { x: f64 },
    #[error("pseudo-inverse saturated for treatment level {level}")]
    Saturated { level: usize },
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
    #[error("no uncensored observations")]
    NoEvents,
    #[error("design matrix is collinear (singular information)")]
    Collinear,
    #[error("{dropped} of {total} proxies saturated, above the allowed fraction {cap}")]
    SaturationBudgetExceeded { dropped: usize, total: usize, cap: f64 },
    #[error("standard deviation must be strictly positive (component {component})")]
    DegenerateSd { component: usize },
    #[error("{failed} of {total} runs failed, above the allowed fraction {cap}")]
    FailureBudget { failed: usize, total: usize, cap: f64 },
}

impl Error {
    /// True for errors that come from the numerical stages rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::InvalidInput(_) | Error::EmptyCell { .. } | Error::InsufficientData(_)
        )
    }
}
