use thiserror::Error;

/// Admissibility failures for phantoms and point sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admissibility {
    TooFewPoints,
    DtCertificate,
    PbCertificate,
    ZeroWeight,
    NonzeroMoment,
}

impl std::fmt::Display for Admissibility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Admissibility::TooFewPoints => "too-few-points",
            Admissibility::DtCertificate => "dt-certificate-failed",
            Admissibility::PbCertificate => "pb-certificate-failed",
            Admissibility::ZeroWeight => "zero-weight",
            Admissibility::NonzeroMoment => "nonzero-first-moment",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("inconsistent derivative: {0}")]
    InconsistentDerivative(String),
    #[error("step too large: orthogonality drift {drift:.3e} at step {step}")]
    StepTooLarge { step: usize, drift: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("insufficient stencil: {0}")]
    InsufficientStencil(String),
    #[error("not admissible: {kind}: {detail}")]
    NotAdmissible { kind: Admissibility, detail: String },
    #[error("support violation: {0}")]
    SupportViolation(String),
    #[error("out of band: {0}")]
    OutOfBand(String),
    #[error("out of grid: {0}")]
    OutOfGrid(String),
    #[error("degenerate pair: {0}")]
    DegeneratePair(String),
    #[error("budget exhausted after {0} draws")]
    BudgetExhausted(usize),
    #[error("sign flip detected at step {0}")]
    SignFlip(usize),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("model violation: {0}")]
    ModelViolation(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("corrupt input: {0}")]
    Corrupt(String),
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn not_admissible(kind: Admissibility, detail: impl Into<String>) -> Self {
        Error::NotAdmissible {
            kind,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
