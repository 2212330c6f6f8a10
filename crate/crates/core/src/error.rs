use thiserror::Error;

/// Errors produced anywhere in the scene inference pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("topology mismatch: {0}")]
    Topology(String),
    #[error("requested rank {requested} exceeds available rank {available}")]
    Rank { requested: usize, available: usize },
    #[error("expected {expected} shape coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("exemplar list is empty")]
    EmptyExemplars,
    #[error("object cannot be placed: {0}")]
    Placement(String),
    #[error("point with nonpositive depth {0} cannot be projected")]
    Projection(f64),
    #[error("degenerate bounding box")]
    DegenerateBox,
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("no part is visible under the empty mask")]
    DegenerateView,
    #[error("scale index {0} out of range")]
    InvalidScale(usize),
    #[error("occlusion constraint violated: object {object} uses inadmissible mask {mask}")]
    ConstraintViolation { object: usize, mask: usize },
    #[error("unknown configuration id {0}")]
    UnknownConfig(u32),
    #[error("no detections to lift into a scene")]
    EmptyScene,
    #[error("metric is undefined over an empty set of matched pairs")]
    EmptyPairs,
    #[error("scene sampling failed after {0} attempts")]
    SynthFailure(usize),
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
