use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("integrand is not finite at x = {at}")]
    NonFinite { at: f64 },
    #[error("quadrature did not converge: value {value}, error estimate {error} > requested {requested}")]
    NoConvergence { value: f64, error: f64, requested: f64 },
    #[error("need at least two distinct break points")]
    EmptyInterval,
    #[error("break points must be increasing")]
    UnorderedBreaks,
    #[error("endpoint exponent {beta} outside [0, 1)")]
    BadExponent { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("dimension mismatch: expected {expected} spatial coordinates, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("norm iteration did not converge (residual {residual})")]
    NoConvergence { residual: f64 },
    #[error("empty point set")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("invalid kernel parameters: {0}")]
    InvalidSpec(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("kernel is singular here: {0}")]
    Singular(String),
    #[error("dimension mismatch: kernel has n = {expected}, point has {found} spatial coordinates")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("profile cache {path}: {message}")]
    Cache { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CantorError {
    #[error("delta = {delta} does not satisfy delta + 1 < delta^(2s) for s = {s}")]
    NotNonSelfSimilar { delta: u32, s: f64 },
    #[error("ratio lambda_{generation} = {lambda} leaves no gap (need lambda < 1/delta and (delta+1) lambda^(2s) < 1)")]
    NoGap { generation: usize, lambda: f64 },
    #[error("invalid Cantor parameter: {0}")]
    InvalidParameter(String),
    #[error("point is not in any generation-{generation} cube")]
    Outside { generation: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("malformed LP: {0}")]
    Shape(String),
    #[error("row {row} has negative right-hand side {upper}; the origin must be feasible")]
    InfeasibleOrigin { row: usize, upper: f64 },
    #[error("LP is unbounded along column direction entering at constraint {constraint}")]
    Unbounded { constraint: usize },
    #[error("simplex stalled after {iterations} iterations; last steps: {}", trace.join(" | "))]
    Stalled { iterations: usize, trace: Vec<String> },
    #[error("active constraint matrix became singular")]
    Singular,
}

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid measure parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Cantor(#[from] CantorError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("invalid potential request: {0}")]
    InvalidParameter(String),
    #[error("kernel failed at eval point {point}, atom {atom}: {source}")]
    AtomKernel { point: usize, atom: usize, source: KernelError },
    #[error("field evaluation failed in cube {cube}: {message}")]
    Field { cube: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CapacityError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("invalid capacity problem: {0}")]
    InvalidParameter(String),
    #[error("kernel failed at eval point {point}, atom {atom}: {source}")]
    AtomKernel { point: usize, atom: usize, source: KernelError },
}
