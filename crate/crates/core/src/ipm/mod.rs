//! Primal-dual interior-point method for smooth convex programs
//!
//! ```text
//! min f0(x)  s.t.  f_i(x) <= 0 (i = 1..m),  G x = h
//! ```
//!
//! Each iteration sets `z = mu m / eta`, where `eta = -f(x)^T lambda` is the
//! surrogate gap, solves the Newton system of the perturbed KKT residual
//! `r_z(x, lambda, nu)`, and backtracks on `||r_z||_2` while keeping
//! `lambda > 0` and `f(x) < 0`.
//!
//! Programs implement [`Constraints`] and [`ConvexProgram`]. Phase I
//! ([`phase1`]) only needs [`Constraints`].

mod phase1;
mod qp;
mod solver;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use phase1::{phase1, Phase1Outcome};
pub use qp::QuadraticProgram;
pub use solver::{
    line_search, max_step, newton_direction, residuals, solve, surrogate_gap, write_trace_csv, Direction, IpmSolution,
    IterationRecord, Residuals,
};

/// Inequality and equality constraints `f(x) <= 0`, `G x = h`.
pub trait Constraints {
    /// Number of variables.
    fn n_x(&self) -> usize;

    /// Number of inequality constraints.
    fn m(&self) -> usize;

    /// Stacked constraint values `f(x)`.
    fn constraint_values(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `m x n_x` matrix whose rows are the constraint gradients.
    fn constraint_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// `sum_i lambda_i hess f_i(x)`, or `None` when every constraint is affine.
    fn constraint_hessian_sum(&self, _x: &DVector<f64>, _lambda: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    /// Equality system `(G, h)`; `G` has zero rows when there are none.
    fn equalities(&self) -> (&DMatrix<f64>, &DVector<f64>);
}

/// Objective value and derivatives at one point.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: Option<DMatrix<f64>>,
}

pub trait ConvexProgram: Constraints {
    /// Objective value, gradient and, if `with_hessian`, the Hessian at `x`.
    /// Implementations may share work between the three.
    fn objective(&self, x: &DVector<f64>, with_hessian: bool) -> ObjectiveEval;
}

/// How the inequality multipliers are initialized when none are given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMultipliers {
    /// All ones.
    Ones,
    /// A constant vector scaled so that the initial surrogate gap is 1.
    #[default]
    UnitGap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpmParams {
    /// Gap reduction factor in `z = mu m / eta`.
    pub mu: f64,
    pub eps_feas: f64,
    pub eps: f64,
    /// Backtracking factor.
    pub beta: f64,
    /// Sufficient-decrease factor on the residual norm.
    pub delta: f64,
    pub max_iter: usize,
    pub max_linesearch_steps: usize,
    pub start_multipliers: StartMultipliers,
}

impl Default for IpmParams {
    fn default() -> Self {
        Self {
            mu: 5.0,
            eps_feas: 1e-6,
            eps: 1e-6,
            beta: 0.5,
            delta: 0.05,
            max_iter: 200,
            max_linesearch_steps: 60,
            start_multipliers: StartMultipliers::UnitGap,
        }
    }
}

impl IpmParams {
    pub fn validate(&self) -> Result<(), crate::error::ValidationError> {
        use crate::error::ValidationError::Domain;
        if !(self.mu > 1.0) {
            return Err(Domain(format!("mu must exceed 1, got {}", self.mu)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Domain(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Domain(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.eps > 0.0 && self.eps_feas > 0.0) {
            return Err(Domain("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Primal-dual iterate `(x, lambda, nu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IpmState {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    pub nu: DVector<f64>,
}
