use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset contains no interactions")]
    EmptyDataset,
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },
    #[error("matrix of {rows}x{cols} exceeds the {limit}x{limit} limit")]
    MatrixTooLarge { rows: usize, cols: usize, limit: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },
    #[error("unknown {kind} `{value}`")]
    UnknownVariant { kind: &'static str, value: String },
    #[error("no eligible item to sample")]
    EmptySupport,
    #[error("positive pair table is empty")]
    EmptyPairTable,
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFinite { epoch: usize, detail: String },
    #[error("{stage}: {inner}")]
    Stage { stage: &'static str, inner: alloc::boxed::Box<Error> },
}

impl Error {
    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter { name, message: message.into() }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, inner: alloc::boxed::Box::new(self) }
    }
}
