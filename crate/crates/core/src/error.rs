use std::path::PathBuf;

use thiserror::Error;

/// Input validation failures for the data model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("scenario matrix is empty")]
    EmptyMatrix,
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("probability {value} of scenario {index} is not positive")]
    NonPositiveProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, which is not a usable normalizer")]
    BadProbabilitySum { sum: f64 },
    #[error("ragged scenario matrix: row {row} has {found} columns, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("weight {index} is negative ({value})")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, not 1")]
    WeightSum { sum: f64 },
    #[error("risk level {0} outside (0, 1]")]
    RiskLevel(f64),
    #[error("{0}")]
    Domain(String),
}

/// Failures of the primal-dual interior-point solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IpmError {
    #[error("starting point is not strictly feasible: max f_i(x0) = {max_violation}")]
    InfeasibleStart { max_violation: f64 },
    #[error("callback returned a non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("KKT system is singular or ill-conditioned at iteration {iteration} (backward error {backward_error:e})")]
    SingularKkt { iteration: usize, backward_error: f64 },
    #[error("line search failed after {steps} reductions at iteration {iteration} (gamma = {gamma:e})")]
    LineSearch { iteration: usize, steps: usize, gamma: f64 },
    #[error("no convergence in {iterations} iterations (r_dual {r_dual:e}, r_pri {r_pri:e}, eta {eta_hat:e})")]
    MaxIterations {
        iterations: usize,
        r_dual: f64,
        r_pri: f64,
        eta_hat: f64,
    },
    #[error("equality matrix is rank deficient (rank {rank} < {rows} rows) or has rows >= variables")]
    RankDeficient { rank: usize, rows: usize },
    #[error("problem is infeasible: phase I optimum s = {s_bar:e} is not negative")]
    Infeasible { s_bar: f64 },
}

/// Failures of the dense simplex solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("pivot limit {0} exceeded")]
    MaxPivots(usize),
    #[error("optimal basis failed re-verification: {0}")]
    Verification(String),
    #[error("linear program is {0}")]
    NotOptimal(&'static str),
    #[error("could not parse LP text at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Ipm(#[from] IpmError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("{path}: {msg}")]
    Input { path: PathBuf, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
