use thiserror::Error;

/// Errors surfaced by group arithmetic, representation theory and layer code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported group `{0}`")]
    UnsupportedGroup(String),
    #[error("group context mismatch: {0}")]
    ContextMismatch(String),
    #[error("spatial dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("translation overflow while composing group elements")]
    TranslationOverflow,
    #[error("element set is not a subgroup: {0}")]
    NotASubgroup(String),
    #[error("no irrep table bundled for group `{0}`")]
    NoIrrepTable(String),
    #[error("representation is inconsistent: {0}")]
    InconsistentRepresentation(String),
    #[error("isotypic decomposition failed: {0}")]
    DecompositionFailed(String),
    #[error("window size must be odd and positive, got {0}")]
    WindowSize(usize),
    #[error("channel count mismatch: expected {expected}, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("nonlinearity `{nonlin}` is not admissible for capsule `{capsule}`")]
    Inadmissible { nonlin: String, capsule: String },
    #[error("parameter efficiency undefined: intertwiner space is zero")]
    UndefinedEfficiency,
    #[error("layer chain mismatch at layer {layer}: {reason}")]
    SpecChain { layer: usize, reason: String },
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
