use evar_portfolio::evar::{
    assemble_program, evar_gradient, evar_hessian, evar_objective, grid_oracle_evar, solve_evar_portfolio,
    EvarProblemSpec, LseWorkspace,
};
use evar_portfolio::ipm::{Constraints, IpmParams};
use evar_portfolio::model::{build_scenario_set, portfolio_loss, RiskLevel, ScenarioSet};
use evar_portfolio::risk::{cvar_sample, evar_sample};
use evar_portfolio::Error;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

fn normal_scenarios(rng: &mut ChaCha20Rng, n: usize, big_n: usize, drift: &[f64]) -> ScenarioSet {
    let rows: Vec<Vec<f64>> = (0..big_n)
        .map(|_| {
            (0..n)
                .map(|i| {
                    let z: f64 = rng.sample(StandardNormal);
                    drift.get(i).copied().unwrap_or(0.0) + (1.0 + 0.3 * i as f64) * z
                })
                .collect()
        })
        .collect();
    build_scenario_set(&rows, None).unwrap()
}

fn random_weights(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

#[test]
fn gradient_and_hessian_match_finite_differences() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for inst in 0..10 {
        let n = rng.random_range(1..=20);
        let big_n = rng.random_range(50..=1000);
        let drift: Vec<f64> = (0..n).map(|_| rng.random_range(-0.2..0.2)).collect();
        let s = normal_scenarios(&mut rng, n, big_n, &drift);
        let spec = EvarProblemSpec::new(s, RiskLevel::new(rng.random_range(0.01..0.5)).unwrap());
        for _ in 0..20 {
            let w = random_weights(&mut rng, n);
            let t = rng.random_range(-1.0f64..1.5).exp();
            let g = evar_gradient(&w, t, &spec).unwrap();
            let h = evar_hessian(&w, t, &spec).unwrap();

            let at = |x: &[f64]| (x[..n].to_vec(), x[n]);
            let mut x: Vec<f64> = w.clone();
            x.push(t);
            let gscale = g.amax().max(1.0);
            for k in 0..=n {
                let step = 1e-6 * x[k].abs().max(1.0);
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[k] += step;
                xm[k] -= step;
                let (wp, tp) = at(&xp);
                let (wm, tm) = at(&xm);
                let fd =
                    (evar_objective(&wp, tp, &spec).unwrap() - evar_objective(&wm, tm, &spec).unwrap()) / (2.0 * step);
                let err = (fd - g[k]).abs() / gscale;
                assert!(
                    err < 1e-6,
                    "instance {inst} grad[{k}]: fd {fd} vs {} (rel {err:e})",
                    g[k]
                );
            }

            let hscale = h.amax().max(1e-3);
            for k in 0..=n {
                let step = 1e-5 * x[k].abs().max(1.0);
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[k] += step;
                xm[k] -= step;
                let (wp, tp) = at(&xp);
                let (wm, tm) = at(&xm);
                let col =
                    (evar_gradient(&wp, tp, &spec).unwrap() - evar_gradient(&wm, tm, &spec).unwrap()) / (2.0 * step);
                for i in 0..=n {
                    let err = (col[i] - h[(i, k)]).abs() / hscale;
                    assert!(
                        err < 1e-4,
                        "instance {inst} H[{i},{k}]: fd {} vs {} (rel {err:e})",
                        col[i],
                        h[(i, k)]
                    );
                }
            }

            assert_eq!(h, h.transpose());
            let eig = SymmetricEigen::new(h.clone()).eigenvalues;
            assert!(eig.min() >= -1e-8 * h.norm(), "min eigenvalue {}", eig.min());
        }
    }
}

/// The blockwise formulas: `(R^T diag(e^y) R / S - g g^T / S^2) / t` for the
/// weights, `(sum(y'')/S - (sum(y')/S)^2) / t` for `t`, and
/// `-(R^T y' / S - R^T e^y sum(y') / S^2) / t` across.
#[test]
fn hessian_blocks_match_explicit_formulas() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let n = 4;
    let s = normal_scenarios(&mut rng, n, 300, &[0.1, 0.0, -0.1, 0.05]);
    let spec = EvarProblemSpec::new(s.clone(), RiskLevel::new(0.05).unwrap());
    let w = random_weights(&mut rng, n);
    let t = 0.7;
    let ws = LseWorkspace::compute(&spec, &w, t);
    let sum = ws.sum_exp;
    let r = DMatrix::from_row_slice(s.len(), n, s.returns());
    let e = nalgebra::DVector::from_vec(ws.exp_y.clone());
    let y1 = nalgebra::DVector::from_vec(ws.y1.clone());
    let g = r.transpose() * &e;
    let rde = r.transpose() * DMatrix::from_diagonal(&e) * &r;
    let h1 = (rde / sum - &g * g.transpose() / (sum * sum)) / t;
    let sy1: f64 = ws.y1.iter().sum();
    let h2 = -(r.transpose() * &y1 / sum - &g * sy1 / (sum * sum)) / t;
    let h4 = (ws.y2.iter().sum::<f64>() / sum - (sy1 / sum).powi(2)) / t;

    let h = evar_hessian(&w, t, &spec).unwrap();
    let scale = h.amax();
    for i in 0..n {
        for j in 0..n {
            assert!((h[(i, j)] - h1[(i, j)]).abs() < 1e-12 * scale);
        }
        assert!((h[(i, n)] - h2[i]).abs() < 1e-12 * scale);
        assert!((h[(n, i)] - h2[i]).abs() < 1e-12 * scale);
    }
    assert!((h[(n, n)] - h4).abs() < 1e-12 * scale);
}

#[test]
fn objective_is_jointly_convex() {
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    let s = normal_scenarios(&mut rng, 5, 400, &[]);
    let spec = EvarProblemSpec::new(s, RiskLevel::new(0.05).unwrap());
    for _ in 0..200 {
        let (w1, w2) = (random_weights(&mut rng, 5), random_weights(&mut rng, 5));
        let (t1, t2) = (rng.random_range(0.05..5.0), rng.random_range(0.05..5.0));
        let tau: f64 = rng.random_range(0.01..0.99);
        let wm: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| tau * a + (1.0 - tau) * b).collect();
        let tm = tau * t1 + (1.0 - tau) * t2;
        let lhs = evar_objective(&wm, tm, &spec).unwrap();
        let rhs = tau * evar_objective(&w1, t1, &spec).unwrap() + (1.0 - tau) * evar_objective(&w2, t2, &spec).unwrap();
        assert!(lhs <= rhs + 1e-9);
    }
}

#[test]
fn program_dimensions_do_not_depend_on_sample_size() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let dims = |big_n: usize, rng: &mut ChaCha20Rng| {
        let spec = EvarProblemSpec::new(normal_scenarios(rng, 6, big_n, &[]), RiskLevel::default());
        let p = assemble_program(&spec);
        (p.n_x(), p.m(), p.equalities().0.nrows())
    };
    assert_eq!(dims(100, &mut rng), dims(100_000, &mut rng));
}

#[test]
fn two_assets_match_grid_oracle() {
    let params = IpmParams::default();
    for seed in 0..5 {
        let mut rng = ChaCha20Rng::seed_from_u64(100 + seed);
        let s = normal_scenarios(&mut rng, 2, 1000, &[0.1, 0.3]);
        let alpha = RiskLevel::new(0.05).unwrap();
        let spec = EvarProblemSpec::new(s.clone(), alpha);
        let sol = solve_evar_portfolio(&spec, &params, None).unwrap();
        let (oracle, _) = grid_oracle_evar(&s, alpha, 0.001).unwrap();
        assert!(
            (sol.objective - oracle).abs() < 1e-4,
            "seed {seed}: {} vs {oracle}",
            sol.objective
        );
        assert!(sol.r_dual.unwrap() <= 1e-6 && sol.r_pri.unwrap() <= 1e-6 && sol.eta_hat.unwrap() <= 1e-6);
        let loss = portfolio_loss(sol.weights.weights(), &s).unwrap();
        let (sample, _) = evar_sample(&loss, alpha);
        assert!((sol.objective - sample).abs() < 1e-5);
        assert!(sol.t_star > 0.0);
    }
}

#[test]
fn three_assets_match_grid_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let s = normal_scenarios(&mut rng, 3, 500, &[0.2, 0.0, 0.1]);
    let alpha = RiskLevel::new(0.1).unwrap();
    let sol = solve_evar_portfolio(&EvarProblemSpec::new(s.clone(), alpha), &IpmParams::default(), None).unwrap();
    let (oracle, _) = grid_oracle_evar(&s, alpha, 0.001).unwrap();
    assert!(sol.objective <= oracle + 1e-6);
    assert!(oracle - sol.objective < 1e-4);
}

#[test]
fn single_instrument_is_forced() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let s = normal_scenarios(&mut rng, 1, 500, &[]);
    let alpha = RiskLevel::new(0.05).unwrap();
    let sol = solve_evar_portfolio(&EvarProblemSpec::new(s.clone(), alpha), &IpmParams::default(), None).unwrap();
    assert_eq!(sol.weights.weights(), &[1.0]);
    let (sample, _) = evar_sample(&portfolio_loss(&[1.0], &s).unwrap(), alpha);
    assert!((sol.objective - sample).abs() < 1e-6);
}

#[test]
fn duplicated_column_gives_single_column_value() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let one = normal_scenarios(&mut rng, 1, 800, &[0.1]);
    let rows: Vec<Vec<f64>> = one.rows().map(|r| vec![r[0], r[0]]).collect();
    let s = build_scenario_set(&rows, None).unwrap();
    let alpha = RiskLevel::new(0.05).unwrap();
    let sol = solve_evar_portfolio(&EvarProblemSpec::new(s, alpha), &IpmParams::default(), None).unwrap();
    let (single, _) = evar_sample(&portfolio_loss(&[1.0], &one).unwrap(), alpha);
    assert!((sol.objective - single).abs() < 1e-6, "{} vs {single}", sol.objective);
}

#[test]
fn min_return_constraint_is_respected_and_binds() {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let s = normal_scenarios(&mut rng, 4, 1000, &[0.0, 0.2, 0.4, 0.6]);
    let alpha = RiskLevel::new(0.05).unwrap();
    let free = solve_evar_portfolio(&EvarProblemSpec::new(s.clone(), alpha), &IpmParams::default(), None).unwrap();
    let spec = EvarProblemSpec::new(s.clone(), alpha);
    let r = spec.mean_returns().to_vec();
    let r_free: f64 = r.iter().zip(free.weights.weights()).map(|(a, b)| a * b).sum();
    let r_max = r.iter().copied().fold(f64::MIN, f64::max);
    let r_min = 0.5 * (r_free + r_max);
    let sol = solve_evar_portfolio(&spec.clone().with_min_return(r_min), &IpmParams::default(), None).unwrap();
    let got: f64 = r.iter().zip(sol.weights.weights()).map(|(a, b)| a * b).sum();
    assert!(got >= r_min - 1e-6);
    assert!((got - r_min).abs() < 1e-4, "constraint should bind: {got} vs {r_min}");
    assert!(sol.objective >= free.objective - 1e-9);

    let err = solve_evar_portfolio(&spec.with_min_return(r_max + 0.1), &IpmParams::default(), None).unwrap_err();
    assert!(matches!(err, Error::Ipm(_)), "{err}");
}

#[test]
fn evar_solution_dominates_cvar_under_own_measure_on_samples() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let s = normal_scenarios(&mut rng, 3, 600, &[0.1, 0.0, 0.2]);
    let alpha = RiskLevel::new(0.05).unwrap();
    let sol = solve_evar_portfolio(&EvarProblemSpec::new(s.clone(), alpha), &IpmParams::default(), None).unwrap();
    let uniform = [1.0 / 3.0; 3];
    let own = evar_sample(&portfolio_loss(sol.weights.weights(), &s).unwrap(), alpha).0;
    let other = evar_sample(&portfolio_loss(&uniform, &s).unwrap(), alpha).0;
    assert!(own <= other + 1e-6);
    let c = cvar_sample(&portfolio_loss(sol.weights.weights(), &s).unwrap(), alpha);
    assert!(c <= own + 1e-9);
}

#[test]
fn solution_json_round_trips() {
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    let s = normal_scenarios(&mut rng, 2, 200, &[]);
    let sol = solve_evar_portfolio(
        &EvarProblemSpec::new(s, RiskLevel::default()),
        &IpmParams::default(),
        None,
    )
    .unwrap();
    let json = sol.to_json();
    for key in [
        "weights",
        "t_star",
        "evar",
        "alpha",
        "iterations",
        "r_dual",
        "r_pri",
        "eta_hat",
        "wall_ms",
    ] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    let back: evar_portfolio::evar::PortfolioSolution = serde_json::from_value(json).unwrap();
    assert_eq!(back, sol);
}
