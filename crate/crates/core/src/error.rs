use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("cannot stratify class {class}: too few instances for the requested split")]
    CannotStratify { class: u8 },

    #[error("class {class} is absent from {context}")]
    MissingClass { class: u8, context: &'static str },

    #[error("histogram bin counts differ: {0} vs {1}")]
    BinMismatch(usize, usize),

    #[error("invalid bin count {bins}: {reason}")]
    InvalidBins { bins: usize, reason: &'static str },

    #[error("unadjustable: |tpr - fpr| = {gap:e} is below 1e-8")]
    Unadjustable { gap: f64 },

    #[error("degenerate regression: fewer than two distinct confidence gaps")]
    DegenerateRegression,

    #[error("empty {side} partition")]
    EmptyPartition { side: &'static str },

    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },

    #[error("bin {bin}: {source}")]
    InBin {
        bin: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
