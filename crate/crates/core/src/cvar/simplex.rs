//! Dense bounded-variable primal simplex.
//!
//! Every row gets a slack whose bounds encode the sense (`<=`: `[0, inf)`,
//! `>=`: `(-inf, 0]`, `=`: `[0, 0]`). Rows whose initial residual the slack
//! cannot absorb get an artificial column, removed by a phase-I solve that
//! minimizes their sum. Pricing is Dantzig's rule with a Harris two-pass
//! ratio test and bound flips; after a run of degenerate pivots Bland's rule
//! takes over until progress resumes. The final basis is re-verified from the
//! raw data by a fresh factorization.

use nalgebra::{DMatrix, DVector};

use super::lp::{LinearProgram, LpSolution, LpStatus, RowSense, Sense};
use crate::error::LpError;

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-10;
const HARRIS_TOL: f64 = 1e-10;
const VERIFY_TOL: f64 = 1e-8;
const BLAND_AFTER: usize = 50;
const MAX_REINVERSIONS: usize = 5;

/// A pivot limit proportional to the problem size.
pub fn default_max_pivots(lp: &LinearProgram) -> usize {
    1000 + 20 * (lp.n_vars() + 2 * lp.n_rows())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Free,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Verified {
    x_basic: DVector<f64>,
    y: DVector<f64>,
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    k: usize,
    m: usize,
    nc: usize,
    /// Row and sign of each artificial column `k + m + q`.
    art: Vec<(usize, f64)>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    /// `B^-1 [A I art]`, row major.
    t: Vec<f64>,
    d: Vec<f64>,
    pivots: usize,
    max_pivots: usize,
    pscale: f64,
    dscale: f64,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram, max_pivots: usize) -> Self {
        let (k, m) = (lp.n_vars(), lp.n_rows());
        let mut lo = lp.lo.clone();
        let mut hi = lp.hi.clone();
        let mut x = Vec::with_capacity(k + 2 * m);
        let mut status = Vec::with_capacity(k + 2 * m);
        for j in 0..k {
            let (v, s) = if lo[j].is_finite() {
                (lo[j], Status::Lower)
            } else if hi[j].is_finite() {
                (hi[j], Status::Upper)
            } else {
                (0.0, Status::Free)
            };
            x.push(v);
            status.push(s);
        }
        let xs = DVector::from_column_slice(&x);
        let residual: Vec<f64> = (0..m).map(|i| lp.b[i] - lp.a.row(i).dot(&xs.transpose())).collect();

        let mut art = Vec::new();
        let mut basis = Vec::with_capacity(m);
        for (i, &r) in residual.iter().enumerate() {
            let (sl, sh) = match lp.row_senses[i] {
                RowSense::Le => (0.0, f64::INFINITY),
                RowSense::Ge => (f64::NEG_INFINITY, 0.0),
                RowSense::Eq => (0.0, 0.0),
            };
            lo.push(sl);
            hi.push(sh);
            if r >= sl && r <= sh {
                x.push(r);
                status.push(Status::Basic);
                basis.push(k + i);
            } else {
                x.push(0.0);
                status.push(if sl == 0.0 { Status::Lower } else { Status::Upper });
                art.push((i, r.signum()));
                basis.push(usize::MAX);
            }
        }
        for (q, &(i, sign)) in art.iter().enumerate() {
            lo.push(0.0);
            hi.push(f64::INFINITY);
            x.push(residual[i] * sign);
            status.push(Status::Basic);
            basis[i] = k + m + q;
        }
        let nc = k + m + art.len();

        // The initial basis is diagonal with entries +1 (slack) or the sign
        // of the artificial, so B^-1 A is a row scaling.
        let mut t = vec![0.0; m * nc];
        for i in 0..m {
            let row = &mut t[i * nc..(i + 1) * nc];
            for j in 0..k {
                row[j] = lp.a[(i, j)];
            }
            row[k + i] = 1.0;
        }
        for (q, &(i, sign)) in art.iter().enumerate() {
            let row = &mut t[i * nc..(i + 1) * nc];
            row[k + m + q] = sign;
            for v in row.iter_mut() {
                *v *= sign;
            }
        }
        let pscale = lp.b.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let dscale = lp.c.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        Self {
            lp,
            k,
            m,
            nc,
            art,
            lo,
            hi,
            x,
            status,
            basis,
            t,
            d: vec![0.0; nc],
            pivots: 0,
            max_pivots,
            pscale,
            dscale,
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.k + self.m
    }

    fn raw_col(&self, j: usize) -> DVector<f64> {
        if j < self.k {
            self.lp.a.column(j).into_owned()
        } else if j < self.k + self.m {
            let mut v = DVector::zeros(self.m);
            v[j - self.k] = 1.0;
            v
        } else {
            let (i, sign) = self.art[j - self.k - self.m];
            let mut v = DVector::zeros(self.m);
            v[i] = sign;
            v
        }
    }

    fn phase_one_costs(&self) -> Vec<f64> {
        (0..self.nc)
            .map(|j| if self.is_artificial(j) { 1.0 } else { 0.0 })
            .collect()
    }

    fn phase_two_costs(&self) -> Vec<f64> {
        let flip = if self.lp.sense == Sense::Max { -1.0 } else { 1.0 };
        let mut c = vec![0.0; self.nc];
        for (cj, v) in c.iter_mut().zip(&self.lp.c) {
            *cj = flip * v;
        }
        c
    }

    fn set_costs(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.nc..(i + 1) * self.nc];
                for (dj, tij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        for &j in &self.basis {
            self.d[j] = 0.0;
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let tol = OPT_TOL * self.dscale;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.nc {
            let s = self.status[j];
            if s == Status::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let dj = self.d[j];
            let cand = if dj < -tol && matches!(s, Status::Lower | Status::Free) {
                Some((1.0, -dj))
            } else if dj > tol && matches!(s, Status::Upper | Status::Free) {
                Some((-1.0, dj))
            } else {
                None
            };
            if let Some((dir, score)) = cand {
                if bland {
                    return Some((j, dir));
                }
                if best.is_none_or(|b| score > b.2) {
                    best = Some((j, dir, score));
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Step length and the blocking row (`None` for a bound flip). An
    /// infinite step means the direction is unbounded.
    fn ratio_test(&self, j: usize, dir: f64, bland: bool) -> (f64, Option<usize>) {
        let range = self.hi[j] - self.lo[j];
        let nc = self.nc;
        let limit = |i: usize, slack: f64| -> Option<(f64, f64)> {
            let a = self.t[i * nc + j] * dir;
            let bv = self.basis[i];
            let xb = self.x[bv];
            if a > PIVOT_TOL && self.lo[bv].is_finite() {
                Some((((xb - self.lo[bv]).max(0.0) + slack) / a, a))
            } else if a < -PIVOT_TOL && self.hi[bv].is_finite() {
                Some((((self.hi[bv] - xb).max(0.0) + slack) / -a, a))
            } else {
                None
            }
        };

        if bland {
            let mut best: Option<(f64, usize)> = None;
            for i in 0..self.m {
                if let Some((r, _)) = limit(i, 0.0) {
                    let better = match best {
                        None => true,
                        Some((br, bi)) => r < br - 1e-12 || (r <= br + 1e-12 && self.basis[i] < self.basis[bi]),
                    };
                    if better {
                        best = Some((r, i));
                    }
                }
            }
            return match best {
                Some((r, i)) if r < range => (r, Some(i)),
                _ => (range, None),
            };
        }

        let mut theta_max = f64::INFINITY;
        for i in 0..self.m {
            if let Some((r, _)) = limit(i, HARRIS_TOL) {
                theta_max = theta_max.min(r);
            }
        }
        if theta_max.is_infinite() {
            return (range, None);
        }
        let mut chosen: Option<(f64, f64, usize)> = None;
        for i in 0..self.m {
            if let Some((r, a)) = limit(i, 0.0) {
                if r <= theta_max && chosen.is_none_or(|c| a.abs() > c.1) {
                    chosen = Some((r, a.abs(), i));
                }
            }
        }
        let (r, _, i) = chosen.expect("a row attains the relaxed minimum");
        if range <= r {
            (range, None)
        } else {
            (r, Some(i))
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.nc;
        let inv = 1.0 / self.t[r * nc + j];
        for v in &mut self.t[r * nc..(r + 1) * nc] {
            *v *= inv;
        }
        self.t[r * nc + j] = 1.0;
        let prow: Vec<(usize, f64)> = self.t[r * nc..(r + 1) * nc]
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(c, v)| (c, *v))
            .collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + j];
            if f != 0.0 {
                let row = &mut self.t[i * nc..(i + 1) * nc];
                for &(c, v) in &prow {
                    row[c] -= f * v;
                }
                row[j] = 0.0;
            }
        }
        let dj = self.d[j];
        if dj != 0.0 {
            for &(c, v) in &prow {
                self.d[c] -= dj * v;
            }
            self.d[j] = 0.0;
        }
    }

    /// Moves `x_j` by `dir * theta` and the basic variables along.
    fn step(&mut self, j: usize, dir: f64, theta: f64) {
        if theta == 0.0 {
            return;
        }
        self.x[j] += dir * theta;
        for i in 0..self.m {
            let a = self.t[i * self.nc + j];
            if a != 0.0 {
                self.x[self.basis[i]] -= dir * theta * a;
            }
        }
    }

    fn run(&mut self) -> Result<PhaseEnd, LpError> {
        let mut degenerate = 0usize;
        loop {
            let bland = degenerate >= BLAND_AFTER;
            let Some((j, dir)) = self.choose_entering(bland) else {
                return Ok(PhaseEnd::Optimal);
            };
            if self.pivots >= self.max_pivots {
                return Err(LpError::MaxPivots(self.max_pivots));
            }
            self.pivots += 1;
            let (theta, row) = self.ratio_test(j, dir, bland);
            if theta.is_infinite() {
                return Ok(PhaseEnd::Unbounded);
            }
            degenerate = if theta <= 1e-12 { degenerate + 1 } else { 0 };
            self.step(j, dir, theta);
            match row {
                None => {
                    let (v, s) = if dir > 0.0 {
                        (self.hi[j], Status::Upper)
                    } else {
                        (self.lo[j], Status::Lower)
                    };
                    self.x[j] = v;
                    self.status[j] = s;
                }
                Some(r) => {
                    let leave = self.basis[r];
                    let a = self.t[r * self.nc + j] * dir;
                    // A variable decreasing along the step stops at its lower bound.
                    let (v, s) = if a > 0.0 {
                        (self.lo[leave], Status::Lower)
                    } else {
                        (self.hi[leave], Status::Upper)
                    };
                    self.x[leave] = v;
                    self.status[leave] = s;
                    if self.is_artificial(leave) {
                        self.hi[leave] = 0.0;
                        self.x[leave] = 0.0;
                        self.status[leave] = Status::Lower;
                    }
                    self.pivot(r, j);
                    self.basis[r] = j;
                    self.status[j] = Status::Basic;
                }
            }
        }
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.m, self.m);
        for (i, &j) in self.basis.iter().enumerate() {
            b.set_column(i, &self.raw_col(j));
        }
        b
    }

    fn nonbasic_rhs(&self) -> DVector<f64> {
        let mut rhs = DVector::from_column_slice(&self.lp.b);
        for j in 0..self.nc {
            if self.status[j] != Status::Basic && self.x[j] != 0.0 {
                rhs -= self.raw_col(j) * self.x[j];
            }
        }
        rhs
    }

    /// Rebuilds the tableau, basic values and reduced costs from the raw data.
    fn reinvert(&mut self, cost: &[f64]) -> Result<(), LpError> {
        let binv = self
            .basis_matrix()
            .try_inverse()
            .ok_or_else(|| LpError::Verification("basis matrix is singular".into()))?;
        let (k, m, nc) = (self.k, self.m, self.nc);
        let ts = &binv * &self.lp.a;
        for i in 0..m {
            for j in 0..k {
                self.t[i * nc + j] = ts[(i, j)];
            }
            for s in 0..m {
                self.t[i * nc + k + s] = binv[(i, s)];
            }
            for (q, &(row, sign)) in self.art.iter().enumerate() {
                self.t[i * nc + k + m + q] = sign * binv[(i, row)];
            }
        }
        let xb = &binv * self.nonbasic_rhs();
        for (i, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[i];
        }
        self.set_costs(cost);
        Ok(())
    }

    /// Checks primal feasibility and dual optimality of the current basis
    /// from a fresh factorization.
    fn verify(&self, cost: &[f64]) -> Result<Verified, String> {
        let b = self.basis_matrix();
        let lu = b.clone().lu();
        let x_basic = lu.solve(&self.nonbasic_rhs()).ok_or("basis matrix is singular")?;
        let cb = DVector::from_iterator(self.m, self.basis.iter().map(|&j| cost[j]));
        let y = b.transpose().lu().solve(&cb).ok_or("basis matrix is singular")?;

        let ptol = VERIFY_TOL * self.pscale;
        for (i, &j) in self.basis.iter().enumerate() {
            let v = x_basic[i];
            if v < self.lo[j] - ptol || v > self.hi[j] + ptol {
                return Err(format!(
                    "basic variable {j} = {v:e} outside [{}, {}]",
                    self.lo[j], self.hi[j]
                ));
            }
        }
        let dtol = VERIFY_TOL * self.dscale;
        for j in 0..self.nc {
            let s = self.status[j];
            if s == Status::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let dj = cost[j] - y.dot(&self.raw_col(j));
            let bad = match s {
                Status::Lower => dj < -dtol,
                Status::Upper => dj > dtol,
                Status::Free => dj.abs() > dtol,
                Status::Basic => false,
            };
            if bad {
                return Err(format!(
                    "reduced cost {dj:e} of nonbasic variable {j} has the wrong sign"
                ));
            }
        }
        Ok(Verified { x_basic, y })
    }

    /// Pivots basic artificials (all at zero) out of the basis where the row
    /// allows it; a row with no other nonzero entry is redundant and keeps its
    /// artificial fixed at zero.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.m {
            let a = self.basis[r];
            if !self.is_artificial(a) {
                continue;
            }
            let nc = self.nc;
            let best = (0..self.k + self.m)
                .filter(|&j| self.status[j] != Status::Basic)
                .map(|j| (j, self.t[r * nc + j].abs()))
                .filter(|&(_, v)| v > PIVOT_TOL)
                .max_by(|p, q| p.1.total_cmp(&q.1));
            if let Some((j, _)) = best {
                let theta = self.x[a] / self.t[r * nc + j];
                self.step(j, 1.0, theta);
                self.pivot(r, j);
                self.basis[r] = j;
                self.status[j] = Status::Basic;
                self.status[a] = Status::Lower;
            }
            self.x[a] = 0.0;
            self.hi[a] = 0.0;
        }
        for q in 0..self.art.len() {
            let j = self.k + self.m + q;
            self.hi[j] = 0.0;
        }
    }

    fn solution(&self, status: LpStatus, verified: Option<Verified>) -> LpSolution {
        let mut x = self.x.clone();
        let mut duals = Vec::new();
        if let Some(v) = verified {
            for (i, &j) in self.basis.iter().enumerate() {
                x[j] = v.x_basic[i];
            }
            let flip = if self.lp.sense == Sense::Max { -1.0 } else { 1.0 };
            duals = v.y.iter().map(|y| flip * y).collect();
        }
        x.truncate(self.k);
        let objective = match status {
            LpStatus::Optimal => self.lp.c.iter().zip(&x).map(|(c, v)| c * v).sum(),
            LpStatus::Infeasible => f64::NAN,
            LpStatus::Unbounded => match self.lp.sense {
                Sense::Min => f64::NEG_INFINITY,
                Sense::Max => f64::INFINITY,
            },
        };
        LpSolution {
            status,
            x,
            objective,
            duals,
            basis: self.basis.clone(),
            pivots: self.pivots,
        }
    }
}

/// Solves `lp` to a verified optimal basis, or reports infeasibility or
/// unboundedness.
pub fn simplex_solve(lp: &LinearProgram, max_pivots: usize) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let mut s = Simplex::new(lp, max_pivots);
    if !s.art.is_empty() {
        let c1 = s.phase_one_costs();
        s.set_costs(&c1);
        if let PhaseEnd::Unbounded = s.run()? {
            return Err(LpError::Verification("phase I reported an unbounded direction".into()));
        }
        s.reinvert(&c1)?;
        let infeasibility: f64 = (0..s.art.len()).map(|q| s.x[s.k + s.m + q].max(0.0)).sum();
        if infeasibility > VERIFY_TOL * s.pscale {
            return Ok(s.solution(LpStatus::Infeasible, None));
        }
        s.drive_out_artificials();
    }
    let c2 = s.phase_two_costs();
    s.set_costs(&c2);
    for attempt in 0..=MAX_REINVERSIONS {
        if let PhaseEnd::Unbounded = s.run()? {
            return Ok(s.solution(LpStatus::Unbounded, None));
        }
        match s.verify(&c2) {
            Ok(v) => return Ok(s.solution(LpStatus::Optimal, Some(v))),
            Err(reason) if attempt == MAX_REINVERSIONS => return Err(LpError::Verification(reason)),
            Err(_) => s.reinvert(&c2)?,
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(sense: Sense, c: &[f64], rows: &[(&[f64], RowSense, f64)]) -> LinearProgram {
        let mut lp = LinearProgram::new(sense, c.to_vec());
        lp.a = DMatrix::from_fn(rows.len(), c.len(), |i, j| rows[i].0[j]);
        lp.row_senses = rows.iter().map(|r| r.1).collect();
        lp.b = rows.iter().map(|r| r.2).collect();
        lp
    }

    #[test]
    fn small_maximization() {
        let p = lp(Sense::Max, &[1.0, 1.0], &[(&[1.0, 1.0], RowSense::Le, 1.0)]);
        let s = simplex_solve(&p, 100).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_bounds_and_rows() {
        let p = lp(Sense::Min, &[1.0], &[(&[1.0], RowSense::Le, -1.0)]);
        assert_eq!(simplex_solve(&p, 100).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction() {
        let p = lp(Sense::Max, &[1.0, 0.0], &[(&[1.0, -1.0], RowSense::Le, 1.0)]);
        assert_eq!(simplex_solve(&p, 100).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_bound_flips() {
        // min x - y, x free, y in [0, 2], x + y >= 1, x >= -3 via a row.
        let mut p = lp(
            Sense::Min,
            &[1.0, -1.0],
            &[(&[1.0, 1.0], RowSense::Ge, 1.0), (&[1.0, 0.0], RowSense::Ge, -3.0)],
        );
        p.lo = vec![f64::NEG_INFINITY, 0.0];
        p.hi = vec![f64::INFINITY, 2.0];
        let s = simplex_solve(&p, 100).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        // y = 2 at its upper bound, x = max(-1, -3) = -1.
        assert!((s.x[0] + 1.0).abs() < 1e-12 && (s.x[1] - 2.0).abs() < 1e-12);
        assert!((s.objective + 3.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equality_rows() {
        let p = lp(
            Sense::Min,
            &[1.0, 2.0],
            &[(&[1.0, 1.0], RowSense::Eq, 1.0), (&[2.0, 2.0], RowSense::Eq, 2.0)],
        );
        let s = simplex_solve(&p, 100).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pivot_limit_is_reported() {
        let p = lp(
            Sense::Max,
            &[1.0, 1.0],
            &[(&[1.0, 2.0], RowSense::Le, 1.0), (&[2.0, 1.0], RowSense::Le, 1.0)],
        );
        assert_eq!(simplex_solve(&p, 0).unwrap_err(), LpError::MaxPivots(0));
    }
}
