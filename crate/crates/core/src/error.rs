use thiserror::Error;

/// Errors raised while loading data, fitting models, or computing statistics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },

    #[error("line {line}: negative count {value} for year {year}")]
    NegativeCount { line: u64, year: i32, value: f64 },

    #[error("line {line}: non-finite count for year {year}")]
    NonFiniteCount { line: u64, year: i32 },

    #[error("duplicate year {0}")]
    DuplicateYear(i32),

    #[error("series has {got} observations, at least {need} required")]
    TooFewObservations { got: usize, need: usize },

    #[error("zero count in year {0} cannot be log-transformed")]
    ZeroCount(i32),

    #[error("year {year} lies outside the model domain [{lo}, {hi}]")]
    OutsideDomain { year: f64, lo: f64, hi: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("segment {segment} holds {got} observations, at least {need} required")]
    SegmentTooSmall { segment: usize, got: usize, need: usize },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("initial parameters are infeasible: {0}")]
    InfeasibleInit(String),

    #[error("normal equations are singular even after ridge regularization")]
    Singular,

    #[error("no feasible starting point on the breakpoint grid")]
    NoFeasibleStart,

    #[error("enumeration of {0} breakpoint tuples exceeds the brute-force limit")]
    EnumerationLimit(u128),

    #[error("{0} degrees of freedom; at least 1 required")]
    NoDegreesOfFreedom(i64),

    #[error("series {0} and {1} do not overlap in years")]
    NoOverlap(String, String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
