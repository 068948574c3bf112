use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map directly onto the failure modes of the public operations:
/// bad arguments, malformed files, numerical breakdown, and contract
/// violations detected at run time.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("perturbation radius {epsilon} exceeds the monotonicity bound {bound}")]
    BoundViolation { epsilon: f64, bound: f64 },

    #[error("exhaustive cycle enumeration is limited to 10 points, got {0}")]
    Scale(usize),

    #[error("solver did not converge within {0} iterations")]
    NonConvergence(usize),

    #[error("numerical instability in scaling iterations with reg {reg}")]
    Instability { reg: f64 },

    #[error("degenerate coupling: row {0} carries zero mass")]
    DegenerateCoupling(usize),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("model serialization: {0}")]
    Model(String),
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
