//! Error taxonomy shared by every module in the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation
    /// (non-positive rate, negative time, log of a non-positive value, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Mismatched vector/matrix dimensions between arguments.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Evaluation at a singular point (for instance a Green function at its pole).
    #[error("pole error: {0}")]
    Pole(String),

    /// Work or memory budget exceeded (tensor quadrature blow-up, grid too large).
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Invalid run configuration (CFL violation, bad probe layout, unknown key).
    #[error("config error: {0}")]
    Config(String),

    /// A numerical procedure failed to converge or produced an untrustworthy
    /// value; the message carries diagnostics.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A precondition of a check was not met (for instance a Harnack probe pair
    /// whose target is not reachable along the flow).
    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
