//! The interior-point solver on a user-defined program: maximize the entropy
//! of a distribution on four points subject to a mean constraint.
//!
//! ```text
//! min sum x_i ln x_i   s.t.  x >= 0,  sum x = 1,  sum i x_i = 2.2
//! ```

use evar_portfolio::ipm::{solve, Constraints, ConvexProgram, IpmParams, ObjectiveEval};
use nalgebra::{DMatrix, DVector};

struct MaxEntropy {
    g: DMatrix<f64>,
    h: DVector<f64>,
}

impl Constraints for MaxEntropy {
    fn n_x(&self) -> usize {
        4
    }

    fn m(&self) -> usize {
        4
    }

    fn constraint_values(&self, x: &DVector<f64>) -> DVector<f64> {
        -x
    }

    fn constraint_jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        -DMatrix::identity(4, 4)
    }

    fn equalities(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.g, &self.h)
    }
}

impl ConvexProgram for MaxEntropy {
    fn objective(&self, x: &DVector<f64>, with_hessian: bool) -> ObjectiveEval {
        ObjectiveEval {
            value: x.iter().map(|v| v * v.ln()).sum(),
            gradient: x.map(|v| v.ln() + 1.0),
            hessian: with_hessian.then(|| DMatrix::from_diagonal(&x.map(|v| 1.0 / v))),
        }
    }
}

fn main() -> evar_portfolio::Result<()> {
    let prog = MaxEntropy {
        g: DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 2.0, 3.0]),
        h: DVector::from_column_slice(&[1.0, 2.2]),
    };
    let sol = solve(&prog, DVector::from_element(4, 0.25), None, None, &IpmParams::default())?;
    println!("x = {:.5}", sol.x.transpose());
    println!("entropy {:.6} after {} iterations", -sol.objective, sol.iterations);
    // The maximizer is exponential in i: successive ratios are equal.
    println!(
        "ratios {:.5} {:.5} {:.5}",
        sol.x[1] / sol.x[0],
        sol.x[2] / sol.x[1],
        sol.x[3] / sol.x[2]
    );
    Ok(())
}
