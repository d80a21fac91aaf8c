//! Independent KKT residual checker for reported optima.
//!
//! Works only from the problem data and the reported primal/dual values; it
//! never calls back into the solver.

use nalgebra::DVector;

use super::{LinearProgram, QuadraticProgram, SolveReport, FEASIBILITY_TOL, STATIONARITY_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// Largest constraint violation.
    pub primal: f64,
    /// `||∇f + Cᵀμ + Eᵀν||_∞`.
    pub stationarity: f64,
    /// Most negative inequality multiplier (as a positive number).
    pub dual: f64,
    /// `max_i |μ_i · slack_i|`.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn passes(&self) -> bool {
        self.primal <= FEASIBILITY_TOL
            && self.stationarity <= STATIONARITY_TOL
            && self.dual <= STATIONARITY_TOL
            && self.complementarity <= STATIONARITY_TOL
    }
}

pub fn check_qp(prog: &QuadraticProgram, report: &SolveReport) -> KktResiduals {
    let x = DVector::from_column_slice(&report.solution);
    let (c, d) = prog.combined_inequalities();
    let grad = &prog.hessian * &x + &prog.linear;
    let mu = DVector::from_column_slice(&report.multipliers);
    let nu = DVector::from_column_slice(&report.eq_multipliers);
    let mut stat = grad;
    if c.nrows() > 0 {
        stat += c.transpose() * &mu;
    }
    if prog.eq.nrows() > 0 {
        stat += prog.eq.transpose() * &nu;
    }
    let slack = &d - &c * &x;
    let eq_res = if prog.eq.nrows() > 0 {
        (&prog.eq * &x - &prog.eq_rhs).amax()
    } else {
        0.0
    };
    KktResiduals {
        primal: slack.iter().map(|s| (-s).max(0.0)).fold(eq_res, f64::max),
        stationarity: stat.amax(),
        dual: mu.iter().map(|m| (-m).max(0.0)).fold(0.0, f64::max),
        complementarity: mu
            .iter()
            .zip(slack.iter())
            .map(|(m, s)| (m * s).abs())
            .fold(0.0, f64::max),
    }
}

/// LP variant: the program maximizes `cᵀx`, so stationarity reads `-c + Aᵀμ = 0`.
pub fn check_lp(prog: &LinearProgram, report: &SolveReport) -> KktResiduals {
    let x = DVector::from_column_slice(&report.solution);
    let (a, b) = prog.combined_inequalities();
    let mu = DVector::from_column_slice(&report.multipliers);
    let mut stat = -&prog.cost;
    if a.nrows() > 0 {
        stat += a.transpose() * &mu;
    }
    let slack = &b - &a * &x;
    KktResiduals {
        primal: slack.iter().map(|s| (-s).max(0.0)).fold(0.0, f64::max),
        stationarity: stat.amax(),
        dual: mu.iter().map(|m| (-m).max(0.0)).fold(0.0, f64::max),
        complementarity: mu
            .iter()
            .zip(slack.iter())
            .map(|(m, s)| (m * s).abs())
            .fold(0.0, f64::max),
    }
}
