use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gamma must be positive, got {0}")]
    GammaNotPositive(f64),

    #[error("theta must be positive, got {0}")]
    ThetaNotPositive(f64),

    #[error("x_n needs n >= 3, got {0}")]
    XnUndefined(u128),

    #[error("assumption checks need n_max >= 100, got {0}")]
    RangeTooShort(usize),

    #[error("weight sequence must have w(1) > 0, got {0}")]
    FirstWeightNotPositive(f64),

    #[error("invalid weight {value} at index {index}")]
    InvalidWeight { index: usize, value: f64 },

    #[error("invalid fitness {value} at index {index}")]
    InvalidFitness { index: usize, value: f64 },

    #[error("beta parameter A_k + k must be positive at k = {k}, got {value}")]
    BetaParameter { k: usize, value: f64 },

    #[error("enumeration limited to n <= {max}, got {n}")]
    EnumerationTooLarge { n: usize, max: usize },

    #[error("collapse level {level} exceeds tree size {n}")]
    CollapseOutOfRange { level: usize, n: usize },

    #[error("label {label} outside 1..={n}")]
    LabelOutOfRange { label: usize, n: usize },

    #[error("time change cannot reach t = {t_max}; cumulative parameters stop at {reached:.6}")]
    TimeChangeUnreachable { t_max: usize, reached: f64 },

    #[error("invalid walk spec: {0}")]
    InvalidWalkSpec(String),

    #[error("block {block} needs {terms} pmf terms, cap is {cap}")]
    BlockTooLarge { block: usize, terms: usize, cap: usize },

    #[error("barrier time t = {t} too small for x_n = {x_n}")]
    BarrierTooShort { t: usize, x_n: i64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
