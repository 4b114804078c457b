//! Minimum-EVaR portfolio selection.
//!
//! With `x = (w, t)`, `u_j = (a^j)^T w / t` and `y = -u + ln p`, the program is
//!
//! ```text
//! min  f0(w, t) = t lse(y) - t ln(alpha)
//! s.t. 1^T w = 1,  w >= 0,  t > 0,  optionally r^T w >= r_min
//! ```
//!
//! `f0` is the perspective of a log-sum-exp and hence jointly convex. With the
//! softmax weights `pi = e^y / sum(e^y)` and `b_j = (a^j, -u_j)`:
//!
//! ```text
//! grad f0 = ( -R^T pi,  lse(y) + pi^T u - ln(alpha) )
//! hess f0 = (1/t) sum_j pi_j (b_j - bbar)(b_j - bbar)^T,   bbar = sum_j pi_j b_j
//! ```
//!
//! i.e. `1/t` times the covariance of `b` under `pi`. The `w`-`w` and `t`-`t`
//! blocks are the familiar `(R^T D R / S - g g^T / S^2) / t` and
//! `(sum(y'') / S - (sum(y') / S)^2) / t`; the cross block carries the same
//! `1/t` factor. The number of variables and constraints does not depend on
//! the number of scenarios, only the cost of each evaluation does.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IpmError, Result, ValidationError};
use crate::ipm::{self, Constraints, ConvexProgram, IpmParams, ObjectiveEval, Phase1Outcome};
use crate::model::{dot, portfolio_loss, Portfolio, RiskLevel, ScenarioSet};
use crate::risk::evar_sample;

/// `ln(sum_i e^{v_i})`, shifted by `max(v)` so it never overflows.
pub fn lse(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Data of one minimum-EVaR problem.
#[derive(Debug, Clone)]
pub struct EvarProblemSpec {
    scenarios: ScenarioSet,
    alpha: RiskLevel,
    min_return: Option<f64>,
    mean_returns: Vec<f64>,
    ln_p: Vec<f64>,
}

impl EvarProblemSpec {
    pub fn new(scenarios: ScenarioSet, alpha: RiskLevel) -> Self {
        let mean_returns = scenarios.mean_returns();
        let ln_p = scenarios.probs().iter().map(|p| p.ln()).collect();
        Self {
            scenarios,
            alpha,
            min_return: None,
            mean_returns,
            ln_p,
        }
    }

    /// Adds the constraint `r^T w >= r_min`, `r` the expected instrument returns.
    pub fn with_min_return(mut self, r_min: f64) -> Self {
        self.min_return = Some(r_min);
        self
    }

    pub fn scenarios(&self) -> &ScenarioSet {
        &self.scenarios
    }

    pub fn alpha(&self) -> RiskLevel {
        self.alpha
    }

    pub fn min_return(&self) -> Option<f64> {
        self.min_return
    }

    pub fn mean_returns(&self) -> &[f64] {
        &self.mean_returns
    }

    pub fn n(&self) -> usize {
        self.scenarios.n()
    }
}

/// Per-point quantities shared by the objective, gradient and Hessian.
///
/// Exponentials are stored shifted by `max(y)`; every ratio that uses them is
/// shift invariant.
#[derive(Debug, Clone)]
pub struct LseWorkspace {
    /// `u = R w / t`.
    pub u: Vec<f64>,
    /// `y = -u + ln p`.
    pub y: Vec<f64>,
    pub y_max: f64,
    /// `e^{y - y_max}`.
    pub exp_y: Vec<f64>,
    /// `u .* e^{y - y_max}`.
    pub y1: Vec<f64>,
    /// `u .* y1`.
    pub y2: Vec<f64>,
    /// `sum(e^{y - y_max})`.
    pub sum_exp: f64,
}

impl LseWorkspace {
    pub fn compute(spec: &EvarProblemSpec, w: &[f64], t: f64) -> Self {
        let s = &spec.scenarios;
        let u: Vec<f64> = s.rows().map(|a| dot(a, w) / t).collect();
        let y: Vec<f64> = u.iter().zip(&spec.ln_p).map(|(uj, lp)| lp - uj).collect();
        let y_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp_y: Vec<f64> = y.iter().map(|v| (v - y_max).exp()).collect();
        let y1: Vec<f64> = u.iter().zip(&exp_y).map(|(a, b)| a * b).collect();
        let y2: Vec<f64> = u.iter().zip(&y1).map(|(a, b)| a * b).collect();
        let sum_exp = exp_y.iter().sum();
        Self {
            u,
            y,
            y_max,
            exp_y,
            y1,
            y2,
            sum_exp,
        }
    }

    pub fn lse(&self) -> f64 {
        self.y_max + self.sum_exp.ln()
    }

    /// `sum(y') / sum(e^y)`, the softmax mean of `u`.
    pub fn mean_u(&self) -> f64 {
        self.y1.iter().sum::<f64>() / self.sum_exp
    }

    /// `sum(y'') / sum(e^y)`.
    pub fn mean_u2(&self) -> f64 {
        self.y2.iter().sum::<f64>() / self.sum_exp
    }
}

fn check_t(t: f64) -> Result<(), ValidationError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(ValidationError::Domain(format!("t must be positive, got {t}")))
    }
}

fn check_w(spec: &EvarProblemSpec, w: &[f64]) -> Result<(), ValidationError> {
    if w.len() == spec.n() {
        Ok(())
    } else {
        Err(ValidationError::DimensionMismatch {
            expected: spec.n(),
            found: w.len(),
        })
    }
}

/// `t lse(-R w / t + ln p) - t ln(alpha)`. Defined for any real `w`.
pub fn evar_objective(w: &[f64], t: f64, spec: &EvarProblemSpec) -> Result<f64, ValidationError> {
    check_t(t)?;
    check_w(spec, w)?;
    let ws = LseWorkspace::compute(spec, w, t);
    Ok(objective_from(&ws, t, spec))
}

fn objective_from(ws: &LseWorkspace, t: f64, spec: &EvarProblemSpec) -> f64 {
    t * ws.lse() - t * spec.alpha.value().ln()
}

fn gradient_from(ws: &LseWorkspace, spec: &EvarProblemSpec) -> DVector<f64> {
    let n = spec.n();
    let mut g = DVector::zeros(n + 1);
    for (a, e) in spec.scenarios.rows().zip(&ws.exp_y) {
        for (gi, ai) in g.iter_mut().zip(a) {
            *gi -= ai * e;
        }
    }
    g.rows_mut(0, n).scale_mut(1.0 / ws.sum_exp);
    g[n] = ws.lse() + ws.mean_u() - spec.alpha.value().ln();
    g
}

fn hessian_from(ws: &LseWorkspace, t: f64, spec: &EvarProblemSpec, grad: &DVector<f64>) -> DMatrix<f64> {
    let n = spec.n();
    let dim = n + 1;
    // Softmax mean of b_j = (a^j, -u_j): the w-block of the gradient is -mean(a).
    let mut mean_b = vec![0.0; dim];
    for i in 0..n {
        mean_b[i] = -grad[i];
    }
    mean_b[n] = -ws.mean_u();

    let mut upper = vec![0.0; dim * (dim + 1) / 2];
    let mut c = vec![0.0; dim];
    for ((a, &e), &uj) in spec.scenarios.rows().zip(&ws.exp_y).zip(&ws.u) {
        if e == 0.0 {
            continue;
        }
        for i in 0..n {
            c[i] = a[i] - mean_b[i];
        }
        c[n] = -uj - mean_b[n];
        let mut k = 0;
        for i in 0..dim {
            let ec = e * c[i];
            for &cj in &c[i..] {
                upper[k] += ec * cj;
                k += 1;
            }
        }
    }
    let scale = 1.0 / (t * ws.sum_exp);
    let mut h = DMatrix::zeros(dim, dim);
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            let v = upper[k] * scale;
            h[(i, j)] = v;
            h[(j, i)] = v;
            k += 1;
        }
    }
    h
}

/// Gradient of [`evar_objective`] with respect to `(w, t)`.
pub fn evar_gradient(w: &[f64], t: f64, spec: &EvarProblemSpec) -> Result<DVector<f64>, ValidationError> {
    check_t(t)?;
    check_w(spec, w)?;
    let ws = LseWorkspace::compute(spec, w, t);
    Ok(gradient_from(&ws, spec))
}

/// Hessian of [`evar_objective`] with respect to `(w, t)`; symmetric and
/// positive semidefinite.
pub fn evar_hessian(w: &[f64], t: f64, spec: &EvarProblemSpec) -> Result<DMatrix<f64>, ValidationError> {
    check_t(t)?;
    check_w(spec, w)?;
    let ws = LseWorkspace::compute(spec, w, t);
    let g = gradient_from(&ws, spec);
    Ok(hessian_from(&ws, t, spec, &g))
}

/// The minimum-EVaR program over `x = (w, t)`.
///
/// Inequalities, in order: `-w_i <= 0`, then `r_min - r^T w <= 0` if a minimum
/// return is set, then `-t <= 0`. One equality `1^T w = 1`.
#[derive(Debug, Clone)]
pub struct EvarProgram<'a> {
    spec: &'a EvarProblemSpec,
    g: DMatrix<f64>,
    h: DVector<f64>,
}

/// Builds the program for `spec`.
pub fn assemble_program(spec: &EvarProblemSpec) -> EvarProgram<'_> {
    let n = spec.n();
    let mut g = DMatrix::from_element(1, n + 1, 1.0);
    g[(0, n)] = 0.0;
    EvarProgram {
        spec,
        g,
        h: DVector::from_element(1, 1.0),
    }
}

impl Constraints for EvarProgram<'_> {
    fn n_x(&self) -> usize {
        self.spec.n() + 1
    }

    fn m(&self) -> usize {
        self.spec.n() + 1 + usize::from(self.spec.min_return.is_some())
    }

    fn constraint_values(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.spec.n();
        let mut f = Vec::with_capacity(self.m());
        f.extend(x.rows(0, n).iter().map(|w| -w));
        if let Some(r_min) = self.spec.min_return {
            f.push(r_min - dot(&self.spec.mean_returns, x.rows(0, n).as_slice()));
        }
        f.push(-x[n]);
        DVector::from_vec(f)
    }

    fn constraint_jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.spec.n();
        let m = self.m();
        let mut df = DMatrix::zeros(m, n + 1);
        for i in 0..n {
            df[(i, i)] = -1.0;
        }
        if self.spec.min_return.is_some() {
            for (i, r) in self.spec.mean_returns.iter().enumerate() {
                df[(n, i)] = -r;
            }
        }
        df[(m - 1, n)] = -1.0;
        df
    }

    fn equalities(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.g, &self.h)
    }
}

impl ConvexProgram for EvarProgram<'_> {
    fn objective(&self, x: &DVector<f64>, with_hessian: bool) -> ObjectiveEval {
        let n = self.spec.n();
        let t = x[n];
        let w = x.rows(0, n);
        let ws = LseWorkspace::compute(self.spec, w.as_slice(), t);
        let gradient = gradient_from(&ws, self.spec);
        let hessian = with_hessian.then(|| hessian_from(&ws, t, self.spec, &gradient));
        ObjectiveEval {
            value: objective_from(&ws, t, self.spec),
            gradient,
            hessian,
        }
    }
}

/// Constraints on `w` alone (the EVaR variable `t` is unconstrained apart from
/// positivity), used to find a strictly feasible start.
struct WeightConstraints<'a> {
    r: &'a [f64],
    r_min: f64,
    g: DMatrix<f64>,
    h: DVector<f64>,
}

impl Constraints for WeightConstraints<'_> {
    fn n_x(&self) -> usize {
        self.r.len()
    }

    fn m(&self) -> usize {
        self.r.len() + 1
    }

    fn constraint_values(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut f: Vec<f64> = w.iter().map(|v| -v).collect();
        f.push(self.r_min - dot(self.r, w.as_slice()));
        DVector::from_vec(f)
    }

    fn constraint_jacobian(&self, _w: &DVector<f64>) -> DMatrix<f64> {
        let n = self.r.len();
        let mut df = DMatrix::zeros(n + 1, n);
        for i in 0..n {
            df[(i, i)] = -1.0;
            df[(n, i)] = -self.r[i];
        }
        df
    }

    fn equalities(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.g, &self.h)
    }
}

/// Which optimizer produced a [`PortfolioSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    EvarPd,
    CvarPrimalLp,
    CvarDualLp,
}

/// Optimal portfolio with solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSolution {
    pub method: Method,
    pub weights: Portfolio,
    /// Optimal auxiliary variable: `t` of the EVaR problem, or the VaR level of
    /// the CVaR problem. Infinite (`null` in JSON) for the EVaR at `alpha = 1`.
    #[serde(with = "nullable_f64")]
    pub t_star: f64,
    /// Optimal value of the method's own risk measure.
    pub objective: f64,
    pub alpha: RiskLevel,
    /// IPM iterations or simplex pivots.
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_dual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_pri: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_hat: Option<f64>,
    pub wall_ms: f64,
}

mod nullable_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl PortfolioSolution {
    /// JSON object with the optimal value also under the measure's own key
    /// (`evar` or `cvar`).
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("solution serializes");
        let key = match self.method {
            Method::EvarPd => "evar",
            Method::CvarPrimalLp | Method::CvarDualLp => "cvar",
        };
        v[key] = serde_json::json!(self.objective);
        v
    }
}

/// Solves the minimum-EVaR problem by the primal-dual method.
///
/// Without a minimum return the start is `w = 1/n` (or the interior-shifted
/// `start`), `t = 1`. With one, a phase-I solve on the weight constraints
/// supplies a strictly feasible `w` unless `start` already is. At
/// `alpha = 1` the EVaR is the mean loss and the problem is solved directly as
/// the best vertex.
pub fn solve_evar_portfolio(
    spec: &EvarProblemSpec,
    params: &IpmParams,
    start: Option<&Portfolio>,
) -> Result<PortfolioSolution> {
    params.validate()?;
    let n = spec.n();
    let clock = Instant::now();
    if spec.alpha.value() == 1.0 {
        return mean_vertex_solution(spec, clock);
    }

    let mut w0 = match start {
        Some(p) => {
            check_w(spec, p.weights())?;
            p.weights().iter().map(|w| 0.99 * w + 0.01 / n as f64).collect()
        }
        None => vec![1.0 / n as f64; n],
    };
    if let Some(r_min) = spec.min_return {
        if dot(&spec.mean_returns, &w0) <= r_min {
            let mut g = DMatrix::from_element(1, n, 1.0);
            g.fill(1.0);
            let cons = WeightConstraints {
                r: &spec.mean_returns,
                r_min,
                g,
                h: DVector::from_element(1, 1.0),
            };
            let uniform = DVector::from_element(n, 1.0 / n as f64);
            match ipm::phase1(&cons, &uniform, params)? {
                Phase1Outcome::Feasible { x, .. } => w0 = x.iter().copied().collect(),
                Phase1Outcome::Infeasible { s_bar, .. } => return Err(IpmError::Infeasible { s_bar }.into()),
            }
        }
    }

    let prog = assemble_program(spec);
    let mut x0 = DVector::from_vec(w0);
    x0 = x0.insert_row(n, 1.0);
    let sol = ipm::solve(&prog, x0, None, None, params)?;
    let t_star = sol.x[n];
    let weights = Portfolio::renormalized(sol.x.rows(0, n).iter().copied().collect())?;
    let objective = evar_objective(weights.weights(), t_star, spec)?;
    let wall_ms = clock.elapsed().as_secs_f64() * 1e3;
    Ok(PortfolioSolution {
        method: Method::EvarPd,
        weights,
        t_star,
        objective,
        alpha: spec.alpha,
        iterations: sol.iterations,
        r_dual: Some(sol.r_dual),
        r_pri: Some(sol.r_pri),
        eta_hat: Some(sol.eta_hat),
        wall_ms,
    })
}

/// `alpha = 1`: minimize the mean loss, i.e. put everything on the instrument
/// with the highest expected return (which also maximizes `r^T w`).
fn mean_vertex_solution(spec: &EvarProblemSpec, clock: Instant) -> Result<PortfolioSolution> {
    let r = &spec.mean_returns;
    let (best, &r_best) = r
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("at least one instrument");
    if let Some(r_min) = spec.min_return {
        if r_best < r_min {
            return Err(IpmError::Infeasible { s_bar: r_min - r_best }.into());
        }
    }
    let mut w = vec![0.0; spec.n()];
    w[best] = 1.0;
    Ok(PortfolioSolution {
        method: Method::EvarPd,
        weights: Portfolio::renormalized(w)?,
        t_star: f64::INFINITY,
        objective: -r_best,
        alpha: spec.alpha,
        iterations: 0,
        r_dual: None,
        r_pri: None,
        eta_hat: None,
        wall_ms: clock.elapsed().as_secs_f64() * 1e3,
    })
}

/// Brute-force minimum EVaR over a simplex grid for `n <= 3`, evaluating the
/// sample EVaR of every grid portfolio. `n = 2` scans `w_1` with the given
/// step; `n = 3` scans a grid of ten times the step and then the step-sized
/// grid around the best coarse point.
pub fn grid_oracle_evar(scenarios: &ScenarioSet, alpha: RiskLevel, step: f64) -> Result<(f64, Vec<f64>)> {
    let n = scenarios.n();
    let eval = |w: &[f64]| -> f64 {
        let loss = portfolio_loss(w, scenarios).expect("dimension checked");
        evar_sample(&loss, alpha).0
    };
    let best_of = |cands: Vec<Vec<f64>>| -> (f64, Vec<f64>) {
        cands
            .into_par_iter()
            .map(|w| (eval(&w), w))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("nonempty grid")
    };
    match n {
        1 => Ok((eval(&[1.0]), vec![1.0])),
        2 => {
            let k = (1.0 / step).round() as usize;
            Ok(best_of(
                (0..=k)
                    .map(|i| {
                        let w1 = i as f64 / k as f64;
                        vec![w1, 1.0 - w1]
                    })
                    .collect(),
            ))
        }
        3 => {
            let fine = (1.0 / step).round() as i64;
            let coarse_every = 10;
            let point = |i: i64, j: i64| {
                let (a, b) = (i as f64 / fine as f64, j as f64 / fine as f64);
                vec![a, b, (1.0 - a - b).max(0.0)]
            };
            let mut coarse = Vec::new();
            for i in (0..=fine).step_by(coarse_every) {
                for j in (0..=fine - i).step_by(coarse_every) {
                    coarse.push((i, j));
                }
            }
            let (_, wc) = best_of(coarse.iter().map(|&(i, j)| point(i, j)).collect());
            let ci = (wc[0] * fine as f64).round() as i64;
            let cj = (wc[1] * fine as f64).round() as i64;
            let r = 2 * coarse_every as i64;
            let mut local = Vec::new();
            for i in (ci - r).max(0)..=(ci + r).min(fine) {
                for j in (cj - r).max(0)..=(cj + r).min(fine - i) {
                    local.push(point(i, j));
                }
            }
            Ok(best_of(local))
        }
        _ => Err(Error::Validation(ValidationError::Domain(format!(
            "grid oracle supports n <= 3, got {n}"
        )))),
    }
}
