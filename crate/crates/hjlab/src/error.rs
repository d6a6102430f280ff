use thiserror::Error;

/// Failures raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Legendre argmax hit the search ball boundary (radius {radius}) at q = {q:?}")]
    RadiusTooSmall { radius: f64, q: Vec<f64> },

    #[error("Hopf-Lax minimizer reached the search boundary at x = {x:?}")]
    SearchRadius { x: Vec<f64> },

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("value {value} outside the tabulated range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

impl Error {
    /// Errors caused by the caller's inputs rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Dimension { .. } | Error::Input(_) | Error::Precondition(_) | Error::GridMismatch(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
