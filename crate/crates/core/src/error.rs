use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

/// Every failure the library can report.
///
/// [`LabError::kind`] gives a stable machine-readable tag; the job runner maps
/// kinds onto process exit codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("unsupported dimension {0} (at most 3)")]
    UnsupportedDimension(usize),
    #[error("degenerate polytope: {0}")]
    Degenerate(String),
    #[error("polynomial fit inconsistent: {0}")]
    FitInconsistent(String),
    #[error("weight unbounded: {0}")]
    Unbounded(String),
    #[error("point lies on the singular locus: {0}")]
    SingularLocus(String),
    #[error("model undefined: {0}")]
    ModelUndefined(String),
    #[error("estimate unstable: {0}")]
    EstimateUnstable(String),
    #[error("obstruction suspected: {0}")]
    ObstructionSuspected(String),
    #[error("newton failure at continuity step {index}: {reason}")]
    PathFailure { index: usize, reason: String },
    #[error("flow singularity at t = {time}: {reason}")]
    FlowSingularity { time: f64, reason: String },
    #[error("time step violates stability bound: dt = {dt} > {bound}")]
    Instability { dt: f64, bound: f64 },
    #[error("candidate metric not positive: {0}")]
    NotPositive(String),
    #[error("insufficient stencil: {0}")]
    Stencil(String),
    #[error("io: {0}")]
    Io(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl LabError {
    pub fn kind(&self) -> &'static str {
        match self {
            LabError::Invalid(_) => "invalid-input",
            LabError::UnsupportedDimension(_) => "unsupported-dimension",
            LabError::Degenerate(_) => "degenerate-polytope",
            LabError::FitInconsistent(_) => "fit-inconsistent",
            LabError::Unbounded(_) => "weight-unbounded",
            LabError::SingularLocus(_) => "singular-locus",
            LabError::ModelUndefined(_) => "model-undefined",
            LabError::EstimateUnstable(_) => "estimate-unstable",
            LabError::ObstructionSuspected(_) => "obstruction-suspected",
            LabError::PathFailure { .. } => "path-failure",
            LabError::FlowSingularity { .. } => "flow-singularity",
            LabError::Instability { .. } => "instability",
            LabError::NotPositive(_) => "not-positive",
            LabError::Stencil(_) => "insufficient-stencil",
            LabError::Io(_) => "io",
            LabError::Internal(_) => "internal",
        }
    }

    /// True for failures of a numerical solver to converge, as opposed to
    /// malformed input.
    pub fn is_non_convergence(&self) -> bool {
        matches!(
            self,
            LabError::ObstructionSuspected(_)
                | LabError::PathFailure { .. }
                | LabError::FlowSingularity { .. }
                | LabError::EstimateUnstable(_)
        )
    }
}
