use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DyadicError {
    #[error("|n| is undefined for n = 0")]
    TopBitOfZero,
    #[error("{numerator}/2^{resolution} is not in [0, 1)")]
    PointOutOfRange { numerator: String, resolution: u64 },
    #[error("cannot parse dyadic point {0:?}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WalshError {
    #[error("grid of length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("resolution mismatch: {left} vs {right}")]
    ResolutionMismatch { left: u32, right: u32 },
    #[error("memory budget exceeded: resolution {requested} needs more than the limit of resolution {limit}")]
    Budget { requested: u32, limit: u32 },
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WindowError {
    #[error("window violates 1 <= lambda_n <= n at n = {n} (lambda_n = {lambda})")]
    OutOfBounds { n: String, lambda: String },
    #[error("window decreases at n = {n}: lambda_n = {lambda}, lambda_(n+1) = {next}")]
    Decreasing { n: u64, lambda: u64, next: u64 },
    #[error("table-backed window has {len} entries, lambda_{n} requested")]
    BeyondTable { n: String, len: usize },
    #[error("invalid window parameter: {0}")]
    Parameter(String),
    #[error("cannot parse window spec {0:?}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeansError {
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Walsh(#[from] WalshError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlockError {
    #[error("block polynomial needs 2*gamma < m and gamma >= 1, got m = {m}, gamma = {gamma}")]
    Shape { m: u64, gamma: u64 },
    #[error("mu(v, j) needs v < 2^gamma, got v = {v}, gamma = {gamma}")]
    VOutOfRange { v: String, gamma: u64 },
    #[error("mu(v, j) needs j < gamma, got j = {j}, gamma = {gamma}")]
    JOutOfRange { j: u64, gamma: u64 },
    #[error("dense form of P(m = {m}) exceeds the budget of m <= {limit}")]
    Budget { m: u64, limit: u64 },
    #[error("corollary precondition fails: lambda_ell = {lambda} is not below the block size {block}")]
    WindowTooWide { lambda: String, block: String },
    #[error("assertion ({assertion}) fails at x = {x}: {detail}")]
    Verification {
        assertion: &'static str,
        x: String,
        detail: String,
    },
    #[error("internal contradiction at x = {x}: neither ell1 nor ell2 qualifies")]
    NoQualifyingEll { x: String },
    #[error(transparent)]
    Window(#[from] WindowError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrliczError {
    #[error("invalid Orlicz parameter: {0}")]
    Parameter(String),
    #[error("cannot parse Orlicz spec {0:?}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("cannot parse plan mode {0:?} (expected strict or relaxed:<margin>)")]
    Mode(String),
    #[error("level count must be at least 1")]
    NoLevels,
    #[error("sup n/lambda_n is finite for this window (n/lambda_n <= {bound}); no divergence plan exists")]
    BoundedRatio { bound: String },
    #[error("window has no analytic witness and no n <= {limit} satisfies n/lambda_n > 2^{log2_threshold}")]
    NoWitness { limit: String, log2_threshold: u64 },
    #[error("truncation level {requested} exceeds the {available} numeric plan levels")]
    Truncation { requested: usize, available: usize },
    #[error("level {level}: gamma = {gamma} exceeds the evaluation budget")]
    Budget { level: usize, gamma: u64 },
    #[error("plan invariant fails at level {level}: {detail}")]
    Invariant { level: usize, detail: String },
    #[error("certificate fails at level {level}, x = {x}: {detail}")]
    Certificate {
        level: usize,
        x: String,
        detail: String,
    },
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    Orlicz(#[from] OrliczError),
}
