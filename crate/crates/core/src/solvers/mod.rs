//! Small dense convex programs: QPs by a primal active-set method, LPs by
//! vertex pursuit on the same machinery.
//!
//! Sizes in this crate are tiny (at most ~10 variables, ~100 rows), so
//! everything is dense and recomputed per iteration. Box bounds are lowered to
//! inequality rows appended after the user rows: for each bounded variable `j`
//! in order, the upper row `x_j <= hi` and then the lower row `-x_j <= -lo`
//! (infinite bounds produce no row). Indices in [`SolveReport::active_set`]
//! and [`SolveReport::multipliers`] refer to that combined row order.

mod active_set;
pub mod kkt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Halfspace, Point};
use active_set::{equality_point, Dense, Outcome, MU_TOL};

pub const FEASIBILITY_TOL: f64 = 1e-8;
pub const STATIONARITY_TOL: f64 = 1e-7;
pub const PSD_CLAMP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("hessian is not symmetric")]
    NotSymmetric,
    #[error("hessian is not positive semidefinite (min eigenvalue {0:e})")]
    NotConvex(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub solution: Vec<f64>,
    /// Combined inequality rows active at the solution, ascending.
    pub active_set: Vec<usize>,
    pub iterations: usize,
    /// One nonnegative multiplier per combined inequality row.
    pub multipliers: Vec<f64>,
    pub eq_multipliers: Vec<f64>,
    pub objective: f64,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    fn failed(status: SolveStatus, n: usize, iterations: usize) -> Self {
        Self {
            status,
            solution: vec![f64::NAN; n],
            active_set: Vec::new(),
            iterations,
            multipliers: Vec::new(),
            eq_multipliers: Vec::new(),
            objective: f64::NAN,
        }
    }
}

/// `min ½ xᵀHx + gᵀx  s.t.  Cx <= d, Ex = f, lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub ineq: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
    pub eq: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl QuadraticProgram {
    pub fn new(hessian: DMatrix<f64>, linear: DVector<f64>) -> Self {
        let n = linear.len();
        Self {
            hessian,
            linear,
            ineq: DMatrix::zeros(0, n),
            ineq_rhs: DVector::zeros(0),
            eq: DMatrix::zeros(0, n),
            eq_rhs: DVector::zeros(0),
            bounds: None,
        }
    }

    pub fn with_inequalities(mut self, c: DMatrix<f64>, d: DVector<f64>) -> Self {
        self.ineq = c;
        self.ineq_rhs = d;
        self
    }

    pub fn with_equalities(mut self, e: DMatrix<f64>, f: DVector<f64>) -> Self {
        self.eq = e;
        self.eq_rhs = f;
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn n(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x)
    }

    /// User inequality rows followed by lowered bound rows.
    pub fn combined_inequalities(&self) -> (DMatrix<f64>, DVector<f64>) {
        lower_bounds(&self.ineq, &self.ineq_rhs, self.bounds.as_deref())
    }

    fn validate(&self) -> Result<(), SolverError> {
        let n = self.n();
        let dim = |what: &str| Err(SolverError::Dimension(what.to_string()));
        if self.hessian.nrows() != n || self.hessian.ncols() != n {
            return dim("hessian");
        }
        if self.ineq.ncols() != n || self.ineq.nrows() != self.ineq_rhs.len() {
            return dim("inequalities");
        }
        if self.eq.ncols() != n || self.eq.nrows() != self.eq_rhs.len() {
            return dim("equalities");
        }
        if self.bounds.as_ref().is_some_and(|b| b.len() != n) {
            return dim("bounds");
        }
        let asym = (&self.hessian - self.hessian.transpose()).amax();
        if asym > 1e-10 * (1.0 + self.hessian.amax()) {
            return Err(SolverError::NotSymmetric);
        }
        Ok(())
    }
}

/// `max cᵀx  s.t.  Ax <= b, lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub cost: DVector<f64>,
    pub ineq: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl LinearProgram {
    pub fn new(cost: DVector<f64>, ineq: DMatrix<f64>, ineq_rhs: DVector<f64>) -> Self {
        Self {
            cost,
            ineq,
            ineq_rhs,
            bounds: None,
        }
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn n(&self) -> usize {
        self.cost.len()
    }

    pub fn combined_inequalities(&self) -> (DMatrix<f64>, DVector<f64>) {
        lower_bounds(&self.ineq, &self.ineq_rhs, self.bounds.as_deref())
    }

    fn validate(&self) -> Result<(), SolverError> {
        let n = self.n();
        if self.ineq.ncols() != n || self.ineq.nrows() != self.ineq_rhs.len() {
            return Err(SolverError::Dimension("inequalities".into()));
        }
        if self.bounds.as_ref().is_some_and(|b| b.len() != n) {
            return Err(SolverError::Dimension("bounds".into()));
        }
        Ok(())
    }
}

fn lower_bounds(
    c: &DMatrix<f64>,
    d: &DVector<f64>,
    bounds: Option<&[(f64, f64)]>,
) -> (DMatrix<f64>, DVector<f64>) {
    let n = c.ncols();
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    if let Some(bounds) = bounds {
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if hi.is_finite() {
                let mut r = DVector::zeros(n);
                r[j] = 1.0;
                rows.push((r, hi));
            }
            if lo.is_finite() {
                let mut r = DVector::zeros(n);
                r[j] = -1.0;
                rows.push((r, -lo));
            }
        }
    }
    if rows.is_empty() {
        return (c.clone(), d.clone());
    }
    let m = c.nrows();
    let mut a = DMatrix::zeros(m + rows.len(), n);
    let mut b = DVector::zeros(m + rows.len());
    a.rows_mut(0, m).copy_from(c);
    b.rows_mut(0, m).copy_from(d);
    for (k, (r, rhs)) in rows.into_iter().enumerate() {
        a.set_row(m + k, &r.transpose());
        b[m + k] = rhs;
    }
    (a, b)
}

fn max_changes(n: usize, m: usize) -> usize {
    10 * (n + m).max(1)
}

/// Finds a point satisfying `Ex = f`, `Ax <= b` by minimizing the largest
/// violation. Returns the point and the number of active-set changes spent.
fn phase_one(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    eq: &DMatrix<f64>,
    f: &DVector<f64>,
) -> Result<DVector<f64>, SolveStatus> {
    let n = a.ncols();
    let m = a.nrows();
    let x0 = equality_point(eq, f, n).ok_or(SolveStatus::Infeasible)?;
    let viol = a * &x0 - b;
    let (worst_row, worst) =
        viol.iter().enumerate().fold(
            (usize::MAX, 0.0f64),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    if worst <= 0.0 {
        return Ok(x0);
    }
    // Variables (x, t): min t  s.t.  Ax - t <= b, -t <= 0, Ex = f.
    let mut a1 = DMatrix::zeros(m + 1, n + 1);
    a1.view_mut((0, 0), (m, n)).copy_from(a);
    for i in 0..m {
        a1[(i, n)] = -1.0;
    }
    a1[(m, n)] = -1.0;
    let mut b1 = DVector::zeros(m + 1);
    b1.rows_mut(0, m).copy_from(b);
    let mut e1 = DMatrix::zeros(eq.nrows(), n + 1);
    e1.view_mut((0, 0), (eq.nrows(), n)).copy_from(eq);
    let mut g1 = DVector::zeros(n + 1);
    g1[n] = 1.0;
    let mut start = DVector::zeros(n + 1);
    start.rows_mut(0, n).copy_from(&x0);
    start[n] = worst;
    let dense = Dense {
        hessian: None,
        linear: &g1,
        ineq: &a1,
        ineq_rhs: &b1,
        eq: &e1,
    };
    let sol = dense.solve(
        start,
        vec![worst_row],
        max_changes(n + 1, m + 1 + eq.nrows()),
    );
    let scale = 1.0 + b.amax();
    match sol.outcome {
        Outcome::Optimal if sol.x[n] <= 1e-10 * scale => Ok(sol.x.rows(0, n).into_owned()),
        Outcome::Optimal => Err(SolveStatus::Infeasible),
        Outcome::MaxIter => Err(SolveStatus::MaxIter),
        Outcome::Unbounded => Err(SolveStatus::Infeasible),
    }
}

/// Solves a convex QP. The Hessian must be PSD up to [`PSD_CLAMP`]; tiny
/// negative eigenvalues are clamped to zero.
pub fn solve_qp(prog: &QuadraticProgram) -> Result<SolveReport, SolverError> {
    prog.validate()?;
    let n = prog.n();
    let hessian = psd_clamped(&prog.hessian)?;
    let (a, b) = prog.combined_inequalities();
    let x0 = match phase_one(&a, &b, &prog.eq, &prog.eq_rhs) {
        Ok(x) => x,
        Err(status) => return Ok(SolveReport::failed(status, n, 0)),
    };
    let dense = Dense {
        hessian: Some(&hessian),
        linear: &prog.linear,
        ineq: &a,
        ineq_rhs: &b,
        eq: &prog.eq,
    };
    let sol = dense.solve(x0, Vec::new(), max_changes(n, a.nrows() + prog.eq.nrows()));
    Ok(finish(sol, |x| prog.objective(x)))
}

fn finish(sol: active_set::Solution, objective: impl Fn(&DVector<f64>) -> f64) -> SolveReport {
    let n = sol.x.len();
    match sol.outcome {
        Outcome::Optimal => SolveReport {
            status: SolveStatus::Optimal,
            objective: objective(&sol.x),
            solution: sol.x.iter().copied().collect(),
            active_set: sol.working,
            iterations: sol.changes,
            multipliers: sol.mu.iter().copied().collect(),
            eq_multipliers: sol.nu.iter().copied().collect(),
        },
        Outcome::Unbounded => SolveReport::failed(SolveStatus::Unbounded, n, sol.changes),
        Outcome::MaxIter => SolveReport::failed(SolveStatus::MaxIter, n, sol.changes),
    }
}

fn psd_clamped(h: &DMatrix<f64>) -> Result<DMatrix<f64>, SolverError> {
    if h.nrows() == 0 {
        return Ok(h.clone());
    }
    let eig = SymmetricEigen::new(h.clone());
    let min = eig.eigenvalues.min();
    if min >= 0.0 {
        return Ok(h.clone());
    }
    if min < -PSD_CLAMP {
        return Err(SolverError::NotConvex(min));
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&clamped) * v.transpose();
    Ok((&rebuilt + rebuilt.transpose()) * 0.5)
}

/// Solves an LP. When the optimal face is not a single point the
/// lexicographically smallest optimal vertex is returned.
pub fn solve_lp(prog: &LinearProgram) -> Result<SolveReport, SolverError> {
    solve_lp_impl(prog, true)
}

fn solve_lp_impl(prog: &LinearProgram, lexicographic: bool) -> Result<SolveReport, SolverError> {
    prog.validate()?;
    let n = prog.n();
    let (a, b) = prog.combined_inequalities();
    let no_eq = DMatrix::zeros(0, n);
    let no_rhs = DVector::zeros(0);
    let x0 = match phase_one(&a, &b, &no_eq, &no_rhs) {
        Ok(x) => x,
        Err(status) => return Ok(SolveReport::failed(status, n, 0)),
    };
    let neg_cost = -&prog.cost;
    let dense = Dense {
        hessian: None,
        linear: &neg_cost,
        ineq: &a,
        ineq_rhs: &b,
        eq: &no_eq,
    };
    let budget = max_changes(n, a.nrows());
    let mut sol = dense.solve(x0, Vec::new(), budget);
    if sol.outcome != Outcome::Optimal || !lexicographic {
        return Ok(finish(sol, |x| prog.cost.dot(x)));
    }

    let scale = 1.0 + prog.cost.amax();
    let unique = sol.working.len() == n && sol.working.iter().all(|&i| sol.mu[i] > MU_TOL * scale);
    if !unique {
        // Walk the optimal face coordinate by coordinate, pinning rows whose
        // multipliers certify optimality so the objective value is exact.
        let mut eq_rows: Vec<DVector<f64>> = sol
            .working
            .iter()
            .filter(|&&i| sol.mu[i] > MU_TOL * scale)
            .map(|&i| a.row(i).transpose())
            .collect();
        let mut eq_rhs: Vec<f64> = sol
            .working
            .iter()
            .filter(|&&i| sol.mu[i] > MU_TOL * scale)
            .map(|&i| b[i])
            .collect();
        let mut x = sol.x.clone();
        let mut changes = sol.changes;
        for j in 0..n {
            let e = stack_rows(&eq_rows, n);
            if active_set::null_space(&e, n).ncols() == 0 {
                break;
            }
            let mut unit = DVector::zeros(n);
            unit[j] = 1.0;
            let pass = Dense {
                hessian: None,
                linear: &unit,
                ineq: &a,
                ineq_rhs: &b,
                eq: &e,
            };
            let res = pass.solve(x.clone(), Vec::new(), budget);
            changes += res.changes;
            if res.outcome != Outcome::Optimal {
                break;
            }
            x = res.x;
            eq_rows.push(unit);
            eq_rhs.push(x[j]);
        }
        sol.x = x;
        sol.changes = changes;
        let slack = &b - &a * &sol.x;
        sol.working = (0..a.nrows())
            .filter(|&i| slack[i] <= FEASIBILITY_TOL * (1.0 + b[i].abs()))
            .collect();
    }
    Ok(finish(sol, |x| prog.cost.dot(x)))
}

fn stack_rows(rows: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows.len(), n);
    for (i, r) in rows.iter().enumerate() {
        m.set_row(i, &r.transpose());
    }
    m
}

/// Returns a point with `a_k·x <= b_k - 1e-9·||a_k||` for every row, or `None`.
///
/// Maximizes a normalized margin `t <= 1` over the rows.
pub fn feasibility_check(rows: &[Halfspace]) -> Option<Point> {
    let m = rows.len();
    if m == 0 {
        return None;
    }
    let mut a = DMatrix::zeros(m, 3);
    let mut b = DVector::zeros(m);
    for (k, h) in rows.iter().enumerate() {
        a[(k, 0)] = h.normal.x;
        a[(k, 1)] = h.normal.y;
        a[(k, 2)] = h.norm();
        b[k] = h.offset;
    }
    let lp = LinearProgram::new(DVector::from_vec(vec![0.0, 0.0, 1.0]), a, b).with_bounds(vec![
        (f64::NEG_INFINITY, f64::INFINITY),
        (f64::NEG_INFINITY, f64::INFINITY),
        (f64::NEG_INFINITY, 1.0),
    ]);
    let report = solve_lp_impl(&lp, false).ok()?;
    if !report.is_optimal() {
        return None;
    }
    let x = Point::new(report.solution[0], report.solution[1]);
    let ok = report.solution[2] > 1e-9 && rows.iter().all(|h| h.eval(&x) <= -1e-9 * h.norm());
    ok.then_some(x)
}
