use std::path::PathBuf;

use crate::arch::Violation;

/// Errors produced by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("adjacency is {rows}x{cols} but the type list has {types} entries")]
    Shape {
        rows: usize,
        cols: usize,
        types: usize,
    },
    #[error("adjacency entries must be 0 or 1, found {0}")]
    NonBinary(u8),
    #[error("invalid architecture: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("cannot pad a {have}-layer architecture down to {target} layers")]
    PadTooSmall { have: usize, target: usize },
    #[error("not a bijection on interior positions: {0}")]
    NotBijection(String),
    #[error("{n_layers} layers would need ({n_layers}-2)! permutations; at most {max} layers are supported")]
    TooManyLayers { n_layers: usize, max: usize },
    #[error("architecture has {have} layers but the space expects {expected}")]
    LayerCount { have: usize, expected: usize },
    #[error("operation id {op} is outside a vocabulary of {n_types} types")]
    OpOutOfRange { op: usize, n_types: usize },
    #[error("unexpected {0} layer in an interior type list")]
    Placeholder(&'static str),
    #[error("unknown operation name `{0}`")]
    UnknownOp(String),
    #[error("degenerate cell: no path from input to output")]
    DegenerateCell,
    #[error("edge cell: {0}")]
    EdgeCell(String),
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("labels must be finite (row {row})")]
    NonFinite { row: usize },
    #[error("kendall tau is undefined when every value in one argument is tied")]
    AllTied,
    #[error("normal equations are singular")]
    Singular,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("could not sample a valid architecture after {0} attempts")]
    SamplingFailed(usize),
    #[error("space admits only {available} distinct architectures, {requested} requested")]
    SpaceTooSmall { available: usize, requested: usize },
    #[error("split needs {need} records but the dataset has {have}")]
    SplitSize { need: usize, have: usize },
    #[error("architectures not found in the labeled dataset: {0:?}")]
    NotFound(Vec<usize>),
    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("unsupported model format version {0}")]
    ModelVersion(u32),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
