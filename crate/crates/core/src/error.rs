use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("boundary point at step {step}: orbit leaves the coded set")]
    BoundaryPoint { step: usize },

    #[error("orbit ended at 0 after {step} steps")]
    OrbitEnded { step: usize },

    #[error("digit not admissible: transition {from} -> {to} is forbidden")]
    NotAdmissible { from: u32, to: u32 },

    #[error("digit {0} is not a branch of this map")]
    NoSuchBranch(u32),

    #[error("digit not admissible: point lies outside the image of branch {0}")]
    OutsideBranchImage(u32),

    #[error("transition matrix not primitive")]
    NotPrimitive,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),

    #[error("containment hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Failures that come from the dynamics or numerics rather than from bad
    /// input; the CLI maps these to exit code 3.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BoundaryPoint { .. }
                | Error::OrbitEnded { .. }
                | Error::NotPrimitive
                | Error::Numerical(_)
                | Error::HypothesisViolated(_)
                | Error::InsufficientResolution(_)
        )
    }
}
