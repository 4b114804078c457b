use nalgebra::{DMatrix, DVector};

use super::{Constraints, ConvexProgram, ObjectiveEval};

/// `min 1/2 x^T Q x + c^T x  s.t.  A x <= b,  G x = h` with `Q` positive
/// semidefinite. `Q = 0` gives a linear program.
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
}

impl QuadraticProgram {
    pub fn new(q: DMatrix<f64>, c: DVector<f64>) -> Self {
        let n = c.len();
        assert_eq!(q.shape(), (n, n));
        Self {
            q,
            c,
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
            g: DMatrix::zeros(0, n),
            h: DVector::zeros(0),
        }
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        assert_eq!(a.ncols(), self.c.len());
        assert_eq!(a.nrows(), b.len());
        self.a = a;
        self.b = b;
        self
    }

    pub fn with_equalities(mut self, g: DMatrix<f64>, h: DVector<f64>) -> Self {
        assert_eq!(g.ncols(), self.c.len());
        assert_eq!(g.nrows(), h.len());
        self.g = g;
        self.h = h;
        self
    }
}

impl Constraints for QuadraticProgram {
    fn n_x(&self) -> usize {
        self.c.len()
    }

    fn m(&self) -> usize {
        self.a.nrows()
    }

    fn constraint_values(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - &self.b
    }

    fn constraint_jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }

    fn equalities(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.g, &self.h)
    }
}

impl ConvexProgram for QuadraticProgram {
    fn objective(&self, x: &DVector<f64>, with_hessian: bool) -> ObjectiveEval {
        let qx = &self.q * x;
        ObjectiveEval {
            value: 0.5 * x.dot(&qx) + self.c.dot(x),
            gradient: qx + &self.c,
            hessian: with_hessian.then(|| self.q.clone()),
        }
    }
}
