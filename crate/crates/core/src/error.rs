use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum CdcError {
    #[error("field mismatch: GF(2^{left}) element used with GF(2^{right})")]
    FieldMismatch { left: u32, right: u32 },

    #[error("zero has no inverse")]
    ZeroInverse,

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("element {value} is outside GF(2^{m})")]
    ElementOutOfRange { value: u64, m: u32 },

    #[error("singular Vandermonde system: coefficient {0} appears twice")]
    SingularVandermonde(u32),

    #[error("system needs {needed} coefficients but only {available} were supplied")]
    NotEnoughCoefficients { needed: usize, available: usize },

    #[error(
        "field too small: {n1} distinct nonzero coefficients are needed for a {segment_bits}-bit \
         segment, which requires 2^m > {n1} for a word size m dividing the segment length"
    )]
    FieldTooSmall { segment_bits: usize, n1: usize },

    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    #[error("invalid job: {0}")]
    InvalidJob(String),

    #[error("divisibility violated: {0}")]
    Divisibility(String),

    #[error("segmentation failed: {0}")]
    Segmentation(String),

    #[error("decoding failed: {0}")]
    Decode(String),

    #[error("map function for file {file} emitted {got}, expected {expected}")]
    PayloadShape {
        file: usize,
        got: String,
        expected: String,
    },

    #[error("node {node} is missing intermediate value v[{function},{file}]")]
    MissingValue {
        node: usize,
        function: usize,
        file: usize,
    },

    #[error("value v[{function},{file}] is needed but no node holds file {file}")]
    Unreachable { function: usize, file: usize },

    #[error("torn record: {len} bytes is not a multiple of the {record}-byte record width")]
    TornRecord { len: usize, record: usize },

    #[error("wire format: {0}")]
    Wire(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CdcError>;
