use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{ConvexProgram, IpmParams, IpmState, ObjectiveEval, StartMultipliers};
use crate::error::IpmError;

/// Blocks of the perturbed KKT residual `r_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub r_dual: DVector<f64>,
    pub r_cent: DVector<f64>,
    pub r_pri: DVector<f64>,
}

impl Residuals {
    /// `||r_z||_2` over all three blocks.
    pub fn norm(&self) -> f64 {
        (self.r_dual.norm_squared() + self.r_cent.norm_squared() + self.r_pri.norm_squared()).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub dx: DVector<f64>,
    pub dlambda: DVector<f64>,
    pub dnu: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub r_dual: f64,
    pub r_pri: f64,
    pub eta_hat: f64,
    /// Accepted step; `None` on the terminating iteration.
    pub gamma: Option<f64>,
    pub z: Option<f64>,
    /// `||r_z||_2` before the step, at the iteration's `z`.
    pub r_norm: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct IpmSolution {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    pub nu: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub r_dual: f64,
    pub r_pri: f64,
    pub eta_hat: f64,
    pub trace: Vec<IterationRecord>,
}

/// `-f^T lambda`.
pub fn surrogate_gap(f_vals: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    -f_vals.dot(lambda)
}

/// Everything the iteration needs at one point.
struct PointEval {
    obj: ObjectiveEval,
    f: DVector<f64>,
    df: DMatrix<f64>,
}

fn evaluate<P: ConvexProgram + ?Sized>(prog: &P, x: &DVector<f64>, with_hessian: bool) -> Result<PointEval, IpmError> {
    let obj = prog.objective(x, with_hessian);
    if !obj.value.is_finite() || obj.gradient.iter().any(|v| !v.is_finite()) {
        return Err(IpmError::NonFinite("objective"));
    }
    if let Some(h) = &obj.hessian {
        if h.iter().any(|v| !v.is_finite()) {
            return Err(IpmError::NonFinite("objective hessian"));
        }
    }
    let f = prog.constraint_values(x);
    let df = prog.constraint_jacobian(x);
    if f.iter().chain(df.iter()).any(|v| !v.is_finite()) {
        return Err(IpmError::NonFinite("constraints"));
    }
    Ok(PointEval { obj, f, df })
}

fn residuals_at<P: ConvexProgram + ?Sized>(prog: &P, ev: &PointEval, state: &IpmState, z: f64) -> Residuals {
    let (g, h) = prog.equalities();
    let mut r_dual = ev.obj.gradient.clone();
    r_dual.gemv_tr(1.0, &ev.df, &state.lambda, 1.0);
    if g.nrows() > 0 {
        r_dual.gemv_tr(1.0, g, &state.nu, 1.0);
    }
    let r_cent = DVector::from_iterator(
        ev.f.len(),
        ev.f.iter().zip(state.lambda.iter()).map(|(fi, li)| -li * fi - 1.0 / z),
    );
    let r_pri = if g.nrows() > 0 {
        g * &state.x - h
    } else {
        DVector::zeros(0)
    };
    Residuals { r_dual, r_cent, r_pri }
}

/// Residual blocks of the perturbed KKT system at `state` for parameter `z`.
pub fn residuals<P: ConvexProgram + ?Sized>(prog: &P, state: &IpmState, z: f64) -> Result<Residuals, IpmError> {
    let ev = evaluate(prog, &state.x, false)?;
    Ok(residuals_at(prog, &ev, state, z))
}

/// Newton direction of `r_z` at `state`.
///
/// `dlambda` is eliminated through the centrality block, leaving the
/// `(n_x + p)` system
///
/// ```text
/// [ H + Df^T diag(lambda / -f) Df   G^T ] [dx ]   [ -r_dual - Df^T diag(1/f) r_cent ]
/// [ G                               0   ] [dnu] = [ -r_pri                          ]
/// ```
///
/// which is factored densely. The recovered full direction is checked against
/// the unreduced block system by its normwise backward error.
pub fn newton_direction<P: ConvexProgram + ?Sized>(prog: &P, state: &IpmState, z: f64) -> Result<Direction, IpmError> {
    let ev = evaluate(prog, &state.x, true)?;
    let res = residuals_at(prog, &ev, state, z);
    newton_at(prog, &ev, state, &res, 0)
}

fn newton_at<P: ConvexProgram + ?Sized>(
    prog: &P,
    ev: &PointEval,
    state: &IpmState,
    res: &Residuals,
    iteration: usize,
) -> Result<Direction, IpmError> {
    let n_x = prog.n_x();
    let m = ev.f.len();
    let (g, _) = prog.equalities();
    let p = g.nrows();

    let mut h_pd = ev.obj.hessian.clone().unwrap_or_else(|| DMatrix::zeros(n_x, n_x));
    if let Some(hc) = prog.constraint_hessian_sum(&state.x, &state.lambda) {
        h_pd += hc;
    }

    // Df^T diag(lambda / -f) Df
    let mut scaled_df = ev.df.clone();
    for k in 0..m {
        let s = state.lambda[k] / -ev.f[k];
        scaled_df.row_mut(k).scale_mut(s);
    }
    let mut h_red = h_pd.clone();
    h_red.gemm_tr(1.0, &ev.df, &scaled_df, 1.0);

    let dim = n_x + p;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (n_x, n_x)).copy_from(&h_red);
    if p > 0 {
        kkt.view_mut((0, n_x), (n_x, p)).copy_from(&g.transpose());
        kkt.view_mut((n_x, 0), (p, n_x)).copy_from(g);
    }
    let lu = kkt.lu();

    // Solves K d = -r through the reduced system.
    let reduced_solve = |r: &Residuals| -> Option<Direction> {
        let mut rhs_x = -&r.r_dual;
        let inv_f_rcent = DVector::from_iterator(m, r.r_cent.iter().zip(ev.f.iter()).map(|(rc, f)| rc / f));
        rhs_x.gemv_tr(-1.0, &ev.df, &inv_f_rcent, 1.0);
        let mut rhs = DVector::zeros(dim);
        rhs.rows_mut(0, n_x).copy_from(&rhs_x);
        if p > 0 {
            rhs.rows_mut(n_x, p).copy_from(&(-&r.r_pri));
        }
        let sol = lu.solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let dx = sol.rows(0, n_x).into_owned();
        let dnu = sol.rows(n_x, p).into_owned();
        // dlambda = diag(f)^{-1} (r_cent - diag(lambda) Df dx)
        let df_dx = &ev.df * &dx;
        let dlambda = DVector::from_iterator(m, (0..m).map(|k| (r.r_cent[k] - state.lambda[k] * df_dx[k]) / ev.f[k]));
        Some(Direction { dx, dlambda, dnu })
    };

    let singular = |backward_error: f64| IpmError::SingularKkt {
        iteration,
        backward_error,
    };
    let mut dir = reduced_solve(res).ok_or_else(|| singular(f64::INFINITY))?;
    let (mut err, mut be) = block_residual(&h_pd, ev, g, state, res, &dir);

    // Eliminating dlambda divides by f, which loses accuracy near the
    // boundary; refine against the full system before giving up on it.
    for _ in 0..REFINEMENT_STEPS {
        if be <= KKT_TOL {
            break;
        }
        let Some(corr) = reduced_solve(&err) else { break };
        let cand = Direction {
            dx: &dir.dx + corr.dx,
            dlambda: &dir.dlambda + corr.dlambda,
            dnu: &dir.dnu + corr.dnu,
        };
        let (cand_err, cand_be) = block_residual(&h_pd, ev, g, state, res, &cand);
        if !(cand_be < be) {
            break;
        }
        (dir, err, be) = (cand, cand_err, cand_be);
    }
    if !(be <= KKT_TOL) {
        if let Some(full) = full_solve(&h_pd, ev, g, state, res) {
            let (_, full_be) = block_residual(&h_pd, ev, g, state, res, &full);
            if full_be < be {
                (dir, be) = (full, full_be);
            }
        }
    }
    if !(be <= KKT_TOL) {
        return Err(singular(be));
    }
    Ok(dir)
}

/// Relative residual the Newton direction must meet on the full system.
const KKT_TOL: f64 = 1e-8;
const REFINEMENT_STEPS: usize = 3;

/// Dense LU of the unreduced `(n_x + m + p)` system `K d = -r`.
fn full_solve(
    h_pd: &DMatrix<f64>,
    ev: &PointEval,
    g: &DMatrix<f64>,
    state: &IpmState,
    res: &Residuals,
) -> Option<Direction> {
    let (n, m, p) = (h_pd.nrows(), ev.f.len(), g.nrows());
    let dim = n + m + p;
    let mut k = DMatrix::zeros(dim, dim);
    k.view_mut((0, 0), (n, n)).copy_from(h_pd);
    k.view_mut((0, n), (n, m)).copy_from(&ev.df.transpose());
    for i in 0..m {
        for j in 0..n {
            k[(n + i, j)] = -state.lambda[i] * ev.df[(i, j)];
        }
        k[(n + i, n + i)] = -ev.f[i];
    }
    if p > 0 {
        k.view_mut((0, n + m), (n, p)).copy_from(&g.transpose());
        k.view_mut((n + m, 0), (p, n)).copy_from(g);
    }
    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, n).copy_from(&(-&res.r_dual));
    rhs.rows_mut(n, m).copy_from(&(-&res.r_cent));
    rhs.rows_mut(n + m, p).copy_from(&(-&res.r_pri));
    let d = k.lu().solve(&rhs)?;
    if d.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(Direction {
        dx: d.rows(0, n).into_owned(),
        dlambda: d.rows(n, m).into_owned(),
        dnu: d.rows(n + m, p).into_owned(),
    })
}

/// Residual `K d + r` of the full `(n_x + m + p)` Newton system `K d = -r`,
/// blockwise, with its normwise relative size
/// `||K d + r||_inf / (||K||_inf ||d||_inf + ||r||_inf)`.
fn block_residual(
    h_pd: &DMatrix<f64>,
    ev: &PointEval,
    g: &DMatrix<f64>,
    state: &IpmState,
    res: &Residuals,
    dir: &Direction,
) -> (Residuals, f64) {
    let p = g.nrows();
    let mut r1 = h_pd * &dir.dx + &res.r_dual;
    r1.gemv_tr(1.0, &ev.df, &dir.dlambda, 1.0);
    if p > 0 {
        r1.gemv_tr(1.0, g, &dir.dnu, 1.0);
    }
    let df_dx = &ev.df * &dir.dx;
    let r2 = DVector::from_iterator(
        ev.f.len(),
        (0..ev.f.len()).map(|k| -state.lambda[k] * df_dx[k] - ev.f[k] * dir.dlambda[k] + res.r_cent[k]),
    );
    let r3 = if p > 0 {
        g * &dir.dx + &res.r_pri
    } else {
        DVector::zeros(0)
    };

    let abs_row_sum = |m: &DMatrix<f64>, i: usize| m.row(i).iter().map(|v| v.abs()).sum::<f64>();
    let mut k_norm: f64 = 0.0;
    for i in 0..h_pd.nrows() {
        let col_df: f64 = ev.df.column(i).iter().map(|v| v.abs()).sum();
        let col_g: f64 = if p > 0 {
            g.column(i).iter().map(|v| v.abs()).sum()
        } else {
            0.0
        };
        k_norm = k_norm.max(abs_row_sum(h_pd, i) + col_df + col_g);
    }
    for k in 0..ev.f.len() {
        k_norm = k_norm.max(state.lambda[k].abs() * abs_row_sum(&ev.df, k) + ev.f[k].abs());
    }
    for k in 0..p {
        k_norm = k_norm.max(abs_row_sum(g, k));
    }
    let inf = |v: &DVector<f64>| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let d_norm = inf(&dir.dx).max(inf(&dir.dlambda)).max(inf(&dir.dnu));
    let r_norm = inf(&res.r_dual).max(inf(&res.r_cent)).max(inf(&res.r_pri));
    let num = inf(&r1).max(inf(&r2)).max(inf(&r3));
    let den = k_norm * d_norm + r_norm;
    let be = if den == 0.0 { 0.0 } else { num / den };
    (
        Residuals {
            r_dual: r1,
            r_cent: r2,
            r_pri: r3,
        },
        be,
    )
}

/// Backtracking on the residual norm.
///
/// Starts at `0.99 gamma_max`, the largest step in `[0, 1]` keeping
/// `lambda + gamma dlambda >= 0`, and multiplies by `beta` until `f(x+) < 0`
/// and `||r_z(x+)|| <= (1 - delta gamma) ||r_z(x)||`.
pub fn line_search<P: ConvexProgram + ?Sized>(
    prog: &P,
    state: &IpmState,
    dir: &Direction,
    z: f64,
    params: &IpmParams,
) -> Result<(f64, IpmState), IpmError> {
    let r0 = residuals(prog, state, z)?.norm();
    line_search_from(prog, state, dir, z, r0, params, 0)
}

/// Largest step in `[0, 1]` keeping `lambda + gamma dlambda >= 0`.
pub fn max_step(lambda: &DVector<f64>, dlambda: &DVector<f64>) -> f64 {
    lambda
        .iter()
        .zip(dlambda.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(l, d)| -l / d)
        .fold(1.0, f64::min)
}

fn line_search_from<P: ConvexProgram + ?Sized>(
    prog: &P,
    state: &IpmState,
    dir: &Direction,
    z: f64,
    r0: f64,
    params: &IpmParams,
    iteration: usize,
) -> Result<(f64, IpmState), IpmError> {
    let mut gamma = 0.99 * max_step(&state.lambda, &dir.dlambda);
    for _ in 0..params.max_linesearch_steps {
        // Below this the decrease test degenerates to r <= r0 and would
        // accept a step that makes no progress.
        if 1.0 - params.delta * gamma == 1.0 {
            break;
        }
        let x = &state.x + gamma * &dir.dx;
        let f = prog.constraint_values(&x);
        if f.iter().all(|v| *v < 0.0) {
            let next = IpmState {
                lambda: &state.lambda + gamma * &dir.dlambda,
                nu: &state.nu + gamma * &dir.dnu,
                x,
            };
            if let Ok(ev) = evaluate(prog, &next.x, false) {
                let r = residuals_at(prog, &ev, &next, z).norm();
                if r <= (1.0 - params.delta * gamma) * r0 {
                    debug_assert!(next.lambda.iter().all(|l| *l > 0.0));
                    debug_assert!(ev.f.iter().all(|v| *v < 0.0));
                    return Ok((gamma, next));
                }
            }
        }
        gamma *= params.beta;
    }
    Err(IpmError::LineSearch {
        iteration,
        steps: params.max_linesearch_steps,
        gamma,
    })
}

fn check_equality_rank(g: &DMatrix<f64>, n_x: usize) -> Result<(), IpmError> {
    let p = g.nrows();
    if p == 0 {
        return Ok(());
    }
    let svd = g.clone().svd(false, false);
    let tol = 1e-12 * svd.singular_values.max() * (p.max(n_x) as f64);
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    if rank < p || p >= n_x {
        return Err(IpmError::RankDeficient { rank, rows: p });
    }
    Ok(())
}

/// Runs the primal-dual method from a strictly feasible `x0`.
///
/// `lambda0` defaults per [`IpmParams::start_multipliers`], `nu0` to zero.
pub fn solve<P: ConvexProgram + ?Sized>(
    prog: &P,
    x0: DVector<f64>,
    lambda0: Option<DVector<f64>>,
    nu0: Option<DVector<f64>>,
    params: &IpmParams,
) -> Result<IpmSolution, IpmError> {
    let n_x = prog.n_x();
    let m = prog.m();
    let (g, _) = prog.equalities();
    let p = g.nrows();
    assert_eq!(x0.len(), n_x, "starting point has wrong dimension");
    check_equality_rank(g, n_x)?;

    let f0 = prog.constraint_values(&x0);
    let worst = f0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m > 0 && !(worst < 0.0) {
        return Err(IpmError::InfeasibleStart { max_violation: worst });
    }
    let lambda = lambda0.unwrap_or_else(|| match params.start_multipliers {
        StartMultipliers::Ones => DVector::from_element(m, 1.0),
        StartMultipliers::UnitGap => DVector::from_element(m, 1.0 / -f0.sum()),
    });
    assert_eq!(lambda.len(), m, "lambda0 has wrong dimension");
    let nu = nu0.unwrap_or_else(|| DVector::zeros(p));
    let mut state = IpmState { x: x0, lambda, nu };
    let mut trace = Vec::new();

    for iter in 0..=params.max_iter {
        let ev = evaluate(prog, &state.x, true)?;
        let eta = surrogate_gap(&ev.f, &state.lambda);
        let z = if m > 0 { params.mu * m as f64 / eta } else { 1.0 };
        let res = residuals_at(prog, &ev, &state, z);
        let r_dual = res.r_dual.norm();
        let r_pri = res.r_pri.norm();
        if r_pri <= params.eps_feas && r_dual <= params.eps_feas && eta <= params.eps {
            trace.push(IterationRecord {
                iter,
                r_dual,
                r_pri,
                eta_hat: eta,
                gamma: None,
                z: None,
                r_norm: None,
            });
            return Ok(IpmSolution {
                objective: ev.obj.value,
                x: state.x,
                lambda: state.lambda,
                nu: state.nu,
                iterations: iter,
                r_dual,
                r_pri,
                eta_hat: eta,
                trace,
            });
        }
        if iter == params.max_iter {
            return Err(IpmError::MaxIterations {
                iterations: iter,
                r_dual,
                r_pri,
                eta_hat: eta,
            });
        }
        let dir = newton_at(prog, &ev, &state, &res, iter)?;
        let r_norm = res.norm();
        let (gamma, next) = line_search_from(prog, &state, &dir, z, r_norm, params, iter)?;
        trace.push(IterationRecord {
            iter,
            r_dual,
            r_pri,
            eta_hat: eta,
            gamma: Some(gamma),
            z: Some(z),
            r_norm: Some(r_norm),
        });
        state = next;
    }
    unreachable!("loop returns on its last iteration")
}

/// Writes the iteration trace as `iter,r_dual,r_pri,eta_hat,gamma,z`.
pub fn write_trace_csv<W: Write>(trace: &[IterationRecord], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iter", "r_dual", "r_pri", "eta_hat", "gamma", "z"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in trace {
        w.write_record([
            r.iter.to_string(),
            r.r_dual.to_string(),
            r.r_pri.to_string(),
            r.eta_hat.to_string(),
            opt(r.gamma),
            opt(r.z),
        ])?;
    }
    w.flush()?;
    Ok(())
}
