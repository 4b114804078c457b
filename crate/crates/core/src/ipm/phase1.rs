use nalgebra::{DMatrix, DVector};

use super::{solve, Constraints, ConvexProgram, IpmParams, ObjectiveEval};
use crate::error::IpmError;

#[derive(Debug, Clone, PartialEq)]
pub enum Phase1Outcome {
    /// `x` satisfies `f(x) < 0`; `s_bar` is the optimal phase-I value.
    Feasible { x: DVector<f64>, s_bar: f64 },
    /// The optimal phase-I value is not negative. `certain` is false when it
    /// lies within the gap tolerance of zero, where neither verdict is proven.
    Infeasible { s_bar: f64, certain: bool },
}

/// `min s  s.t.  f_i(x) <= s,  G x = h` over `(x, s)`, with `s` last.
struct Augmented<'a, C: ?Sized> {
    inner: &'a C,
    g: DMatrix<f64>,
    h: DVector<f64>,
}

impl<C: Constraints + ?Sized> Constraints for Augmented<'_, C> {
    fn n_x(&self) -> usize {
        self.inner.n_x() + 1
    }

    fn m(&self) -> usize {
        self.inner.m()
    }

    fn constraint_values(&self, xs: &DVector<f64>) -> DVector<f64> {
        let n = self.inner.n_x();
        let s = xs[n];
        self.inner.constraint_values(&xs.rows(0, n).into_owned()).add_scalar(-s)
    }

    fn constraint_jacobian(&self, xs: &DVector<f64>) -> DMatrix<f64> {
        let n = self.inner.n_x();
        let df = self.inner.constraint_jacobian(&xs.rows(0, n).into_owned());
        let mut out = df.insert_column(n, -1.0);
        out.column_mut(n).fill(-1.0);
        out
    }

    fn constraint_hessian_sum(&self, xs: &DVector<f64>, lambda: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = self.inner.n_x();
        self.inner
            .constraint_hessian_sum(&xs.rows(0, n).into_owned(), lambda)
            .map(|h| h.insert_row(n, 0.0).insert_column(n, 0.0))
    }

    fn equalities(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.g, &self.h)
    }
}

impl<C: Constraints + ?Sized> ConvexProgram for Augmented<'_, C> {
    fn objective(&self, xs: &DVector<f64>, with_hessian: bool) -> ObjectiveEval {
        let n = self.inner.n_x();
        let mut gradient = DVector::zeros(n + 1);
        gradient[n] = 1.0;
        ObjectiveEval {
            value: xs[n],
            gradient,
            hessian: with_hessian.then(|| DMatrix::zeros(n + 1, n + 1)),
        }
    }
}

/// Finds a strictly feasible point of `constraints` by solving the phase-I
/// program from `x0`, which must satisfy the equalities and lie in the domain
/// of every `f_i`. The phase-I program must be bounded below.
pub fn phase1<C: Constraints + ?Sized>(
    constraints: &C,
    x0: &DVector<f64>,
    params: &IpmParams,
) -> Result<Phase1Outcome, IpmError> {
    let n = constraints.n_x();
    let (g, h) = constraints.equalities();
    let aug = Augmented {
        inner: constraints,
        g: g.clone().insert_column(n, 0.0),
        h: h.clone(),
    };
    let f0 = constraints.constraint_values(x0);
    let worst = f0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut start = x0.clone().insert_row(n, 0.0);
    start[n] = worst + 1.0;
    let sol = solve(&aug, start, None, None, params)?;
    let s_bar = sol.x[n];
    let x = sol.x.rows(0, n).into_owned();
    if s_bar < 0.0 && constraints.constraint_values(&x).iter().all(|v| *v < 0.0) {
        Ok(Phase1Outcome::Feasible { x, s_bar })
    } else {
        Ok(Phase1Outcome::Infeasible {
            s_bar,
            certain: s_bar > params.eps,
        })
    }
}
