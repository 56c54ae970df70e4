use thiserror::Error;

/// Errors raised while reading or validating a graph description.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("malformed graph document: {0}")]
    Malformed(String),
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(String),
    #[error("edge `{edge}` references unknown vertex `{vertex}`")]
    UnknownVertex { edge: String, vertex: String },
    #[error("edge `{0}`: nonpositive length")]
    NonpositiveLength(String),
    #[error("edge `{0}`: bounded edge needs a finite length and a far endpoint")]
    IncompleteBoundedEdge(String),
    #[error("edge `{0}`: a half-line has no far endpoint and no length")]
    MalformedHalfLine(String),
    #[error("edge `{0}`: nonlinear flag set on a half-line")]
    NonlinearHalfLine(String),
    #[error("unknown edge kind `{0}` (expected `bounded` or `half_line`)")]
    UnknownKind(String),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("empty compact core: at least one bounded edge is required")]
    EmptyCore,
    #[error("graph has no half-line")]
    NoHalfLine,
    #[error("no bounded edge carries the nonlinearity")]
    NoNonlinearEdge,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("exponent p = {0} outside (2, 6)")]
    ExponentOutOfRange(f64),
    #[error("mass mismatch: expected {expected}, found {found}")]
    MassMismatch { expected: f64, found: f64 },
    #[error("functions live on different meshes")]
    MeshMismatch,
    #[error("mass {} is below the threshold {}: {reason}", crate::report::fmt_sig(*mu), crate::report::fmt_sig(*threshold))]
    BelowThreshold { mu: f64, threshold: f64, reason: String },
    #[error("singular linear system (pivot {pivot:e} at row {row})")]
    Singular { row: usize, pivot: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("flow stalled: energy did not decrease after {0} step halvings")]
    Stall(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 2.0 && p < 6.0 {
        Ok(())
    } else {
        Err(Error::ExponentOutOfRange(p))
    }
}
