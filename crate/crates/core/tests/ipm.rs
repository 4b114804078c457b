use approx::assert_abs_diff_eq;
use evar_portfolio::error::IpmError;
use evar_portfolio::ipm::{
    line_search, max_step, newton_direction, phase1, residuals, solve, surrogate_gap, Constraints, ConvexProgram,
    Direction, IpmParams, IpmState, ObjectiveEval, Phase1Outcome, QuadraticProgram,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn state(x: &[f64], lambda: &[f64], nu: &[f64]) -> IpmState {
    IpmState {
        x: dv(x),
        lambda: dv(lambda),
        nu: dv(nu),
    }
}

/// `min x^2  s.t.  -x <= 0`.
fn square_on_halfline() -> QuadraticProgram {
    QuadraticProgram::new(DMatrix::from_element(1, 1, 2.0), dv(&[0.0]))
        .with_inequalities(DMatrix::from_element(1, 1, -1.0), dv(&[0.0]))
}

/// `min (x-2)^2  s.t.  x - 1 <= 0`, up to the constant 4.
fn shifted_square() -> QuadraticProgram {
    QuadraticProgram::new(DMatrix::from_element(1, 1, 2.0), dv(&[-4.0]))
        .with_inequalities(DMatrix::from_element(1, 1, 1.0), dv(&[1.0]))
}

/// Linear objective over the unit ball, plus lower bounds `x >= -2`. The
/// quadratic constraint exercises the constraint-Hessian term.
struct BallProgram {
    c: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
}

impl Constraints for BallProgram {
    fn n_x(&self) -> usize {
        self.c.len()
    }
    fn m(&self) -> usize {
        1 + self.c.len()
    }
    fn constraint_values(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut f = DVector::zeros(self.m());
        f[0] = x.norm_squared() - 1.0;
        for i in 0..x.len() {
            f[1 + i] = -x[i] - 2.0;
        }
        f
    }
    fn constraint_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        let mut d = DMatrix::zeros(n + 1, n);
        for i in 0..n {
            d[(0, i)] = 2.0 * x[i];
            d[(1 + i, i)] = -1.0;
        }
        d
    }
    fn constraint_hessian_sum(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(x.len(), x.len()) * (2.0 * lambda[0]))
    }
    fn equalities(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.g, &self.h)
    }
}

impl ConvexProgram for BallProgram {
    fn objective(&self, x: &DVector<f64>, with_hessian: bool) -> ObjectiveEval {
        let n = x.len();
        ObjectiveEval {
            value: self.c.dot(x),
            gradient: self.c.clone(),
            hessian: with_hessian.then(|| DMatrix::zeros(n, n)),
        }
    }
}

/// Assembles and solves the unreduced `(n_x + m + p)` Newton system directly.
fn full_newton<P: ConvexProgram>(prog: &P, st: &IpmState, z: f64) -> Direction {
    let (n, m) = (prog.n_x(), prog.m());
    let (g, h) = prog.equalities();
    let p = g.nrows();
    let obj = prog.objective(&st.x, true);
    let f = prog.constraint_values(&st.x);
    let df = prog.constraint_jacobian(&st.x);
    let mut hess = obj.hessian.unwrap();
    if let Some(hc) = prog.constraint_hessian_sum(&st.x, &st.lambda) {
        hess += hc;
    }
    let dim = n + m + p;
    let mut k = DMatrix::zeros(dim, dim);
    k.view_mut((0, 0), (n, n)).copy_from(&hess);
    k.view_mut((0, n), (n, m)).copy_from(&df.transpose());
    k.view_mut((0, n + m), (n, p)).copy_from(&g.transpose());
    for i in 0..m {
        for j in 0..n {
            k[(n + i, j)] = -st.lambda[i] * df[(i, j)];
        }
        k[(n + i, n + i)] = -f[i];
    }
    k.view_mut((n + m, 0), (p, n)).copy_from(g);

    let mut r = DVector::zeros(dim);
    let r_dual = obj.gradient + df.transpose() * &st.lambda + g.transpose() * &st.nu;
    r.rows_mut(0, n).copy_from(&r_dual);
    for i in 0..m {
        r[n + i] = -st.lambda[i] * f[i] - 1.0 / z;
    }
    r.rows_mut(n + m, p).copy_from(&(g * &st.x - h));
    let d = k.lu().solve(&(-r)).unwrap();
    Direction {
        dx: d.rows(0, n).into_owned(),
        dlambda: d.rows(n, m).into_owned(),
        dnu: d.rows(n + m, p).into_owned(),
    }
}

fn rel_diff(a: &Direction, b: &Direction) -> f64 {
    let stack = |d: &Direction| {
        DVector::from_iterator(
            d.dx.len() + d.dlambda.len() + d.dnu.len(),
            d.dx.iter().chain(d.dlambda.iter()).chain(d.dnu.iter()).copied(),
        )
    };
    let (sa, sb) = (stack(a), stack(b));
    (&sa - &sb).norm() / sb.norm().max(1e-300)
}

fn random_qp(rng: &mut ChaCha8Rng) -> (QuadraticProgram, IpmState) {
    let n = rng.random_range(2..=10);
    let m = rng.random_range(1..=10);
    let p = rng.random_range(0..n.min(3));
    let b_mat = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = &b_mat * b_mat.transpose();
    let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    // Slack in (0.1, 1.1) so the point is strictly feasible.
    let b = &a * &x + DVector::from_fn(m, |_, _| rng.random_range(0.1..1.1));
    let g = DMatrix::from_fn(p, n, |_, _| rng.random_range(-1.0..1.0));
    let h = &g * &x + DVector::from_fn(p, |_, _| rng.random_range(-0.1..0.1));
    let st = IpmState {
        lambda: DVector::from_fn(m, |_, _| rng.random_range(0.1..2.0)),
        nu: DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0)),
        x,
    };
    (
        QuadraticProgram::new(q, c)
            .with_inequalities(a, b)
            .with_equalities(g, h),
        st,
    )
}

#[test]
fn residual_blocks_by_hand() {
    let prog = square_on_halfline();
    let r = residuals(&prog, &state(&[1.0], &[1e-8], &[]), 1e8).unwrap();
    assert_abs_diff_eq!(r.r_dual[0], 2.0 - 1e-8, epsilon = 1e-15);
    assert_abs_diff_eq!(r.r_cent[0], 0.0, epsilon = 1e-20);
    assert_eq!(r.r_pri.len(), 0);
}

#[test]
fn residuals_vanish_on_the_central_path() {
    // 2x - lambda = 0 and lambda x = 1/z give x = 0.1, lambda = 0.2 at z = 50.
    let prog = square_on_halfline();
    let st = state(&[0.1], &[0.2], &[]);
    let f = prog.constraint_values(&st.x);
    let z = 1.0 / surrogate_gap(&f, &st.lambda);
    assert_abs_diff_eq!(z, 50.0, epsilon = 1e-9);
    assert!(residuals(&prog, &st, z).unwrap().norm() <= 1e-10);

    // Equality-constrained QP: min ||x||^2, x1 + x2 = 1, -x1 <= 0 at its central point.
    let qp = QuadraticProgram::new(DMatrix::identity(2, 2) * 2.0, dv(&[0.0, 0.0]))
        .with_inequalities(DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]), dv(&[0.0]))
        .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), dv(&[1.0]));
    // x = (0.5, 0.5), nu = -1, lambda = 0 would be exact; take lambda small and
    // solve for the matching point: 2 x1 - lambda + nu = 0, 2 x2 + nu = 0.
    let lambda = 0.01;
    let x1 = 0.5 + lambda / 4.0;
    let x2 = 1.0 - x1;
    let nu = -2.0 * x2;
    let st = state(&[x1, x2], &[lambda], &[nu]);
    let z = 1.0 / (lambda * x1);
    assert!(residuals(&qp, &st, z).unwrap().norm() <= 1e-10);
}

#[test]
fn surrogate_gap_arithmetic() {
    assert_eq!(surrogate_gap(&dv(&[-1.0, -1.0, -1.0]), &dv(&[1.0, 1.0, 1.0])), 3.0);
    assert_eq!(surrogate_gap(&dv(&[-1.0, -4.0]), &dv(&[0.0, 0.0])), 0.0);
}

#[test]
fn reduced_and_full_newton_agree_on_one_dimensional_example() {
    let prog = shifted_square();
    let st = state(&[0.5], &[1.0], &[]);
    let reduced = newton_direction(&prog, &st, 10.0).unwrap();
    let full = full_newton(&prog, &st, 10.0);
    assert!(rel_diff(&reduced, &full) <= 1e-10);
}

#[test]
fn reduced_and_full_newton_agree_on_random_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let (qp, st) = random_qp(&mut rng);
        let z = rng.random_range(0.5..1e4);
        let reduced = newton_direction(&qp, &st, z).unwrap();
        let full = full_newton(&qp, &st, z);
        assert!(rel_diff(&reduced, &full) <= 1e-8, "{}", rel_diff(&reduced, &full));
    }
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=6);
        let prog = BallProgram {
            c: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            g: DMatrix::zeros(0, n),
            h: DVector::zeros(0),
        };
        let x = DVector::from_fn(n, |_, _| rng.random_range(-0.3..0.3));
        let st = IpmState {
            x,
            lambda: DVector::from_fn(n + 1, |_, _| rng.random_range(0.1..2.0)),
            nu: DVector::zeros(0),
        };
        let reduced = newton_direction(&prog, &st, 100.0).unwrap();
        assert!(rel_diff(&reduced, &full_newton(&prog, &st, 100.0)) <= 1e-8);
    }
}

#[test]
fn large_z_direction_approaches_equality_newton_step() {
    // min 1/2 x^T Q x + c^T x, 1^T x = 1 with one loose bound far away: as z
    // grows with lambda = 1/(z (-f)), the barrier vanishes and the direction
    // tends to the Newton step of the equality-constrained QP.
    let q = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
    let c = dv(&[1.0, -1.0, 0.5]);
    let g = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
    let x0 = dv(&[0.2, 0.3, 0.5]);
    let qp = QuadraticProgram::new(q.clone(), c.clone())
        .with_inequalities(DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]), dv(&[100.0]))
        .with_equalities(g.clone(), dv(&[1.0]));
    let mut kkt = DMatrix::zeros(4, 4);
    kkt.view_mut((0, 0), (3, 3)).copy_from(&q);
    kkt.view_mut((0, 3), (3, 1)).copy_from(&g.transpose());
    kkt.view_mut((3, 0), (1, 3)).copy_from(&g);
    let mut rhs = DVector::zeros(4);
    rhs.rows_mut(0, 3).copy_from(&-(&q * &x0 + &c));
    let pure = kkt.lu().solve(&rhs).unwrap().rows(0, 3).into_owned();
    let z = 1e12;
    let slack = 100.0 - x0[0];
    let st = IpmState {
        x: x0,
        lambda: dv(&[1.0 / (z * slack)]),
        nu: dv(&[0.0]),
    };
    let d = newton_direction(&qp, &st, z).unwrap();
    assert!((&d.dx - &pure).norm() <= 1e-9 * pure.norm());
}

#[test]
fn step_bound_and_first_trial() {
    assert_eq!(max_step(&dv(&[1.0, 2.0]), &dv(&[0.0, 3.0])), 1.0);
    assert_eq!(max_step(&dv(&[1.0]), &dv(&[-2.0])), 0.5);

    // lambda = 1, dlambda = -2: the first trial is 0.495, which lands on
    // x = 0.005, lambda = 0.01, the central point for 1/z = 5e-5.
    let prog = square_on_halfline();
    let st = state(&[1.0], &[1.0], &[]);
    let dir = Direction {
        dx: dv(&[(0.005 - 1.0) / 0.495]),
        dlambda: dv(&[-2.0]),
        dnu: dv(&[]),
    };
    let params = IpmParams::default();
    let (gamma, next) = line_search(&prog, &st, &dir, 2e4, &params).unwrap();
    assert_abs_diff_eq!(gamma, 0.495, epsilon = 1e-15);
    assert_abs_diff_eq!(next.x[0], 0.005, epsilon = 1e-15);

    // A direction that only makes things worse is rejected, not accepted
    // at a vanishing step.
    let uphill = Direction {
        dx: dv(&[0.0]),
        dlambda: dv(&[-2.0]),
        dnu: dv(&[]),
    };
    assert!(matches!(
        line_search(&prog, &st, &uphill, 0.5, &params),
        Err(IpmError::LineSearch { .. })
    ));
    assert!(next.lambda[0] > 0.0);
}

#[test]
fn accepted_steps_satisfy_their_conditions() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = IpmParams::default();
    for _ in 0..100 {
        let (qp, st) = random_qp(&mut rng);
        let f = qp.constraint_values(&st.x);
        let z = params.mu * qp.m() as f64 / surrogate_gap(&f, &st.lambda);
        let dir = newton_direction(&qp, &st, z).unwrap();
        let (gamma, next) = line_search(&qp, &st, &dir, z, &params).unwrap();
        assert!(gamma > 0.0 && gamma <= 0.99);
        assert!(next.lambda.iter().all(|l| *l > 0.0));
        assert!(qp.constraint_values(&next.x).iter().all(|v| *v < 0.0));
        let before = residuals(&qp, &st, z).unwrap().norm();
        let after = residuals(&qp, &next, z).unwrap().norm();
        assert!(after <= (1.0 - params.delta * gamma) * before);
    }
}

#[test]
fn solves_constrained_square() {
    let sol = solve(&shifted_square(), dv(&[0.0]), None, None, &IpmParams::default()).unwrap();
    assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-6);
    // Multiplier of the active bound is 2.
    assert_abs_diff_eq!(sol.lambda[0], 2.0, epsilon = 1e-5);
}

#[test]
fn solves_tiny_lp_at_vertex() {
    let lp = QuadraticProgram::new(DMatrix::zeros(2, 2), dv(&[1.0, 2.0]))
        .with_inequalities(-DMatrix::identity(2, 2), dv(&[0.0, 0.0]))
        .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), dv(&[1.0]));
    let sol = solve(&lp, dv(&[0.5, 0.5]), None, None, &IpmParams::default()).unwrap();
    assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-6);
    assert_abs_diff_eq!(sol.x[1], 0.0, epsilon = 1e-6);
    assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-6);
}

#[test]
fn solves_equality_only_quadratic() {
    let qp = QuadraticProgram::new(DMatrix::identity(3, 3) * 2.0, DVector::zeros(3))
        .with_equalities(DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]), dv(&[1.0]));
    let sol = solve(&qp, dv(&[1.0, 0.0, 0.0]), None, None, &IpmParams::default()).unwrap();
    for v in sol.x.iter() {
        assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-6);
    }
}

#[test]
fn equality_infeasible_start_is_driven_feasible() {
    let lp = QuadraticProgram::new(DMatrix::identity(2, 2), dv(&[1.0, 2.0]))
        .with_inequalities(-DMatrix::identity(2, 2), dv(&[0.0, 0.0]))
        .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), dv(&[1.0]));
    let sol = solve(&lp, dv(&[2.0, 3.0]), None, None, &IpmParams::default()).unwrap();
    assert!(sol.r_pri <= 1e-6);
    assert_abs_diff_eq!(sol.x.sum(), 1.0, epsilon = 1e-6);
}

#[test]
fn converged_solves_pass_independent_checks() {
    let params = IpmParams {
        eps: 1e-9,
        eps_feas: 1e-9,
        ..IpmParams::default()
    };
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = rng.random_range(2..=6);
        let prog = BallProgram {
            c: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            g: DMatrix::zeros(0, n),
            h: DVector::zeros(0),
        };
        let sol = solve(&prog, DVector::zeros(n), None, None, &params).unwrap();
        // Analytic optimum of a linear objective over the ball: -c / ||c||.
        let expect = -&prog.c / prog.c.norm();
        assert!((&sol.x - &expect).norm() <= 1e-4, "seed {seed}");
        assert_abs_diff_eq!(sol.objective, -prog.c.norm(), epsilon = 1e-8);

        let f = prog.constraint_values(&sol.x);
        assert!(f.iter().all(|v| *v < 0.0));
        assert!(sol.lambda.iter().all(|l| *l > 0.0));
        let eta = surrogate_gap(&f, &sol.lambda);
        assert!(eta <= params.eps);
        let st = IpmState {
            x: sol.x.clone(),
            lambda: sol.lambda.clone(),
            nu: sol.nu.clone(),
        };
        let r = residuals(&prog, &st, 1.0).unwrap();
        assert!(r.r_dual.norm() <= params.eps_feas);

        // Each recorded step reduced the residual at its own z.
        for rec in sol.trace.iter().filter(|r| r.gamma.is_some()) {
            assert!(rec.r_norm.unwrap() > 0.0);
        }
    }
}

#[test]
fn final_gap_is_tied_to_last_z() {
    let sol = solve(&shifted_square(), dv(&[0.0]), None, None, &IpmParams::default()).unwrap();
    let last_step = sol.trace.iter().rev().find(|r| r.z.is_some()).unwrap();
    // z = mu m / eta at the last step, and the step shrinks eta by roughly mu.
    let m = 1.0;
    let implied = IpmParams::default().mu * m / last_step.z.unwrap();
    assert_abs_diff_eq!(implied, last_step.eta_hat, epsilon = 1e-12);
    assert!(sol.eta_hat <= 1e-6);
    assert!(sol.eta_hat >= m / last_step.z.unwrap() / 10.0);
}

#[test]
fn distinct_failure_modes() {
    let infeasible_start = solve(&shifted_square(), dv(&[2.0]), None, None, &IpmParams::default());
    assert!(matches!(infeasible_start, Err(IpmError::InfeasibleStart { .. })));

    let capped = IpmParams {
        max_iter: 2,
        ..IpmParams::default()
    };
    assert!(matches!(
        solve(&shifted_square(), dv(&[0.0]), None, None, &capped),
        Err(IpmError::MaxIterations { iterations: 2, .. })
    ));

    let dup = QuadraticProgram::new(DMatrix::identity(2, 2), DVector::zeros(2))
        .with_equalities(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]), dv(&[1.0, 2.0]));
    assert!(matches!(
        solve(&dup, dv(&[0.5, 0.5]), None, None, &IpmParams::default()),
        Err(IpmError::RankDeficient { rank: 1, rows: 2 })
    ));

    // Singular KKT: a zero objective Hessian with no inequalities.
    let flat = QuadraticProgram::new(DMatrix::zeros(2, 2), dv(&[1.0, 0.0]))
        .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), dv(&[1.0]));
    assert!(matches!(
        newton_direction(&flat, &state(&[0.5, 0.5], &[], &[0.0]), 1.0),
        Err(IpmError::SingularKkt { .. })
    ));
}

#[test]
fn trace_csv_has_header() {
    let sol = solve(&shifted_square(), dv(&[0.0]), None, None, &IpmParams::default()).unwrap();
    let mut buf = Vec::new();
    evar_portfolio::ipm::write_trace_csv(&sol.trace, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("iter,r_dual,r_pri,eta_hat,gamma,z\n"));
    assert_eq!(text.lines().count(), sol.trace.len() + 1);
}

/// Simplex plus `r_min - r^T w <= 0`, as in the minimum-return feasibility
/// problem.
fn min_return_region(r: &[f64], r_min: f64) -> QuadraticProgram {
    let n = r.len();
    let mut a = -DMatrix::identity(n, n);
    a = a.insert_row(n, 0.0);
    for i in 0..n {
        a[(n, i)] = -r[i];
    }
    let mut b = DVector::zeros(n + 1);
    b[n] = -r_min;
    QuadraticProgram::new(DMatrix::zeros(n, n), DVector::zeros(n))
        .with_inequalities(a, b)
        .with_equalities(DMatrix::from_element(1, n, 1.0), dv(&[1.0]))
}

#[test]
fn phase_one_finds_interior_point() {
    let region = min_return_region(&[0.1, 0.2], 0.15);
    match phase1(&region, &dv(&[0.5, 0.5]), &IpmParams::default()).unwrap() {
        Phase1Outcome::Feasible { x, s_bar } => {
            assert!(s_bar < 0.0);
            assert!(region.constraint_values(&x).iter().all(|v| *v < 0.0));
            assert_abs_diff_eq!(x.sum(), 1.0, epsilon = 1e-8);
        }
        other => panic!("expected feasible, got {other:?}"),
    }
}

#[test]
fn phase_one_reports_infeasibility() {
    let region = min_return_region(&[0.1, 0.2], 0.25);
    match phase1(&region, &dv(&[0.5, 0.5]), &IpmParams::default()).unwrap() {
        Phase1Outcome::Infeasible { s_bar, certain } => {
            assert!(s_bar >= 0.0);
            assert!(certain);
        }
        other => panic!("expected infeasible, got {other:?}"),
    }
}
