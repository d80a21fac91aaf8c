//! Primal active-set iteration shared by the QP and LP front ends.
//!
//! Minimizes `½ xᵀHx + gᵀx` subject to `Ax <= b`, `Ex = f` from a feasible
//! start. `H` may be singular (or absent, for LPs): along null directions of
//! the reduced Hessian the objective is linear, and the iteration walks that
//! ray until a constraint blocks it or reports the problem unbounded.
//!
//! Pivoting is Bland-style everywhere (lowest index drops, lowest index
//! blocks), which makes every run deterministic and rules out cycling on
//! degenerate vertices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative threshold under which a reduced-Hessian eigenvalue counts as zero.
const EIG_ZERO: f64 = 1e-10;
/// Multipliers below `-MU_TOL` are released from the working set.
pub(crate) const MU_TOL: f64 = 1e-10;
const STEP_ZERO: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Unbounded,
    MaxIter,
}

pub(crate) struct Dense<'a> {
    pub hessian: Option<&'a DMatrix<f64>>,
    pub linear: &'a DVector<f64>,
    pub ineq: &'a DMatrix<f64>,
    pub ineq_rhs: &'a DVector<f64>,
    pub eq: &'a DMatrix<f64>,
}

pub(crate) struct Solution {
    pub outcome: Outcome,
    pub x: DVector<f64>,
    /// Inequality rows in the final working set, ascending.
    pub working: Vec<usize>,
    /// Multipliers for every inequality row (zero off the working set).
    pub mu: DVector<f64>,
    pub nu: DVector<f64>,
    pub changes: usize,
}

impl Dense<'_> {
    fn n(&self) -> usize {
        self.linear.len()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.hessian {
            Some(h) => h * x + self.linear,
            None => self.linear.clone(),
        }
    }

    fn working_rows(&self, working: &[usize]) -> DMatrix<f64> {
        let n = self.n();
        let me = self.eq.nrows();
        let mut rows = DMatrix::zeros(me + working.len(), n);
        for i in 0..me {
            rows.set_row(i, &self.eq.row(i));
        }
        for (k, &i) in working.iter().enumerate() {
            rows.set_row(me + k, &self.ineq.row(i));
        }
        rows
    }

    /// Runs the iteration from feasible `x0`; `working0` lists inequality rows
    /// assumed active and linearly independent of each other and of `E`.
    pub fn solve(&self, x0: DVector<f64>, working0: Vec<usize>, max_changes: usize) -> Solution {
        let n = self.n();
        let m = self.ineq.nrows();
        let me = self.eq.nrows();
        let mut x = x0;
        let mut working = working0;
        let mut in_working = vec![false; m];
        for &i in &working {
            in_working[i] = true;
        }
        let mut changes = 0usize;
        let hard_cap = 4 * max_changes + 16;

        for _ in 0..hard_cap {
            if changes > max_changes {
                break;
            }
            let grad = self.gradient(&x);
            let rows = self.working_rows(&working);
            let z = null_space(&rows, n);
            let (p, linear) = self.step_direction(&z, &grad);

            let pnorm = p.amax();
            if pnorm <= STEP_ZERO * (1.0 + x.amax()) {
                let lambda = multipliers(&rows, &grad);
                let scale = 1.0 + grad.amax();
                let drop = working
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| lambda[me + k] < -MU_TOL * scale)
                    .map(|(k, &i)| (k, i))
                    .min_by_key(|&(_, i)| i);
                match drop {
                    Some((k, i)) => {
                        working.remove(k);
                        in_working[i] = false;
                        changes += 1;
                    }
                    None => {
                        let mut mu = DVector::zeros(m);
                        for (k, &i) in working.iter().enumerate() {
                            mu[i] = lambda[me + k].max(0.0);
                        }
                        let nu = DVector::from_iterator(me, (0..me).map(|i| lambda[i]));
                        working.sort_unstable();
                        return Solution {
                            outcome: Outcome::Optimal,
                            x,
                            working,
                            mu,
                            nu,
                            changes,
                        };
                    }
                }
                continue;
            }

            // Ratio test, lowest index on ties.
            let mut alpha = if linear { f64::INFINITY } else { 1.0 };
            let mut blocking = None;
            for i in 0..m {
                if in_working[i] {
                    continue;
                }
                let row = self.ineq.row(i);
                let s = row.dot(&p.transpose());
                if s <= 1e-14 * row.amax() * pnorm {
                    continue;
                }
                let slack = self.ineq_rhs[i] - row.dot(&x.transpose());
                let a = (slack / s).max(0.0);
                if a < alpha {
                    alpha = a;
                    blocking = Some(i);
                }
            }
            if alpha.is_infinite() {
                return Solution {
                    outcome: Outcome::Unbounded,
                    x,
                    working,
                    mu: DVector::zeros(m),
                    nu: DVector::zeros(me),
                    changes,
                };
            }
            x += &p * alpha;
            if let Some(i) = blocking {
                let pos = working.partition_point(|&w| w < i);
                working.insert(pos, i);
                in_working[i] = true;
                changes += 1;
            }
        }
        working.sort_unstable();
        Solution {
            outcome: Outcome::MaxIter,
            x,
            working,
            mu: DVector::zeros(m),
            nu: DVector::zeros(me),
            changes,
        }
    }

    /// Newton step in the null space of the working rows, or a descent ray when
    /// the reduced objective is linear along some null direction.
    fn step_direction(&self, z: &DMatrix<f64>, grad: &DVector<f64>) -> (DVector<f64>, bool) {
        let n = self.n();
        let r = z.ncols();
        if r == 0 {
            return (DVector::zeros(n), false);
        }
        let gr = z.transpose() * grad;
        let gscale = 1e-11 * (1.0 + grad.amax());
        let Some(h) = self.hessian else {
            return (-(z * gr), true);
        };
        let hr = z.transpose() * h * z;
        let eig = SymmetricEigen::new(hr);
        let emax = eig.eigenvalues.amax().max(1.0);
        let mut null_part = DVector::zeros(r);
        let mut newton = DVector::zeros(r);
        for k in 0..r {
            let u = eig.eigenvectors.column(k);
            let c = u.dot(&gr);
            let lam = eig.eigenvalues[k];
            if lam <= EIG_ZERO * emax {
                null_part += u * c;
            } else {
                newton += u * (c / lam);
            }
        }
        if null_part.amax() > gscale {
            (-(z * null_part), true)
        } else {
            (-(z * newton), false)
        }
    }
}

/// Orthonormal basis (as columns) of the null space of `rows`. Dependent rows
/// are skipped.
pub(crate) fn null_space(rows: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    for i in 0..rows.nrows() {
        let mut v: DVector<f64> = rows.row(i).transpose();
        let norm0 = v.norm();
        if norm0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let nv = v.norm();
        if nv > 1e-10 * norm0 {
            basis.push(v / nv);
        }
    }
    let rank = basis.len();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n - rank);
    for j in 0..n {
        if rank + cols.len() == n {
            break;
        }
        let mut v = DVector::zeros(n);
        v[j] = 1.0;
        for _ in 0..2 {
            for q in basis.iter().chain(cols.iter()) {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let nv = v.norm();
        if nv > 1e-6 {
            cols.push(v / nv);
        }
    }
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Least-squares multipliers for `grad + rowsᵀ λ = 0`.
fn multipliers(rows: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    if rows.nrows() == 0 {
        return DVector::zeros(0);
    }
    let at = rows.transpose();
    let svd = at.svd(true, true);
    svd.solve(&(-grad), 1e-12)
        .unwrap_or_else(|_| DVector::zeros(rows.nrows()))
}

/// Minimum-norm solution of `E x = f`, or `None` if inconsistent.
pub(crate) fn equality_point(
    eq: &DMatrix<f64>,
    rhs: &DVector<f64>,
    n: usize,
) -> Option<DVector<f64>> {
    if eq.nrows() == 0 {
        return Some(DVector::zeros(n));
    }
    let svd = eq.clone().svd(true, true);
    let x = svd.solve(rhs, 1e-12).ok()?;
    let resid = (eq * &x - rhs).amax();
    (resid <= 1e-9 * (1.0 + rhs.amax())).then_some(x)
}
