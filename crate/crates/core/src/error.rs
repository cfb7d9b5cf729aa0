use std::fmt;

use thiserror::Error;

/// Standing hypotheses on the domain, the kernel and the coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// Bounded open domain.
    H1,
    /// Continuous nonnegative kernel, bounded below near the diagonal.
    H2,
    /// Continuous bounded coefficient.
    H3,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hypothesis::H1 => write!(f, "H1"),
            Hypothesis::H2 => write!(f, "H2"),
            Hypothesis::H3 => write!(f, "H3"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("hypothesis {which} violated: {detail}")]
    Hypothesis { which: Hypothesis, detail: String },

    #[error("singular node {index}: a(x_j) = {value} >= a(x0) = {peak}; the grid touches the argmax set")]
    SingularNode { index: usize, value: f64, peak: f64 },

    #[error("point {point:?} is not in the argmax set (sup a - a(x0) = {gap:e})")]
    NotInMaxSet { point: Vec<f64>, gap: f64 },

    #[error("Perron iteration did not converge after {iterations} iterations (residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("lambda1 = {lambda1} exceeds 1 + tol at lambda_p = -sup a; grid too coarse")]
    Inconsistency { lambda1: f64 },

    #[error("lambda1 = {lambda1} is within tolerance of 1; K~ - I is numerically singular")]
    NearSingularSystem { lambda1: f64 },

    #[error("positivity violated at node {index}: g = {value:e}; grid too coarse")]
    PositivityViolation { index: usize, value: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("unsupported measure: {0}")]
    UnsupportedMeasure(String),

    #[error("invalid eigenpair: {0}")]
    InvalidEigenpair(String),

    #[error("normalization error: {0}")]
    Normalization(String),

    #[error("classification not confirmed: {coarse} on level {level}, {fine} on level {next}")]
    Unconfirmed {
        level: usize,
        next: usize,
        coarse: String,
        fine: String,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn hypothesis(which: Hypothesis, detail: impl Into<String>) -> Self {
        Error::Hypothesis {
            which,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
