use num_complex::Complex64;

/// Errors raised by the numerical library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("matrix numerically singular at z = {z}: |det| = {det:.3e}, condition number = {cond:.3e}")]
    Singular { z: Complex64, det: f64, cond: f64 },
    #[error("resolution failure: {0}")]
    Resolution(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("root finding failed: {0}")]
    RootFinding(String),
    #[error("extrapolation did not converge (estimate {estimate:.6e}); sequence: {sequence:?}")]
    Extrapolation { estimate: Complex64, sequence: Vec<Complex64> },
    #[error("non-integrable singularity near centre {centre}: local exponent {exponent:.4}, p = {p}")]
    NonIntegrable { centre: usize, exponent: f64, p: f64 },
    #[error("no zero-energy resonance: mismatch {mismatch:.3e} (tune the well depth)")]
    NoResonance { mismatch: f64 },
    #[error("residuals not decreasing: {0:?}")]
    NotDecreasing(Vec<f64>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::InvalidArgument(_)
                | Error::Precondition(_)
                | Error::NoResonance { .. }
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
