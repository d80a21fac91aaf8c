use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use super::{
    bernstein_basis, init_trajectory, select_target_pose_with_clearance, verify_continuous_with,
    PoseTrajectory, SafetyCertificate, TargetPose, TrajectoryError, Verdict, VerifyConfig,
};
use crate::geometry::{rotation_derivative, ConvexBody, ConvexRegion, Pose, UnitDirection};
use crate::solvers::{solve_qp, QuadraticProgram, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub margin: f64,
    pub trust_radius: f64,
    pub w_position: f64,
    pub w_yaw: f64,
    pub w_slack: f64,
    pub n_ctrl_select: usize,
    pub max_iters: usize,
    pub shrink: f64,
    pub alpha_floor: f64,
    pub min_interval: f64,
    /// Inward shift of every halfspace when choosing the target pose.
    pub target_clearance: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            margin: 0.02,
            trust_radius: 0.3,
            w_position: 1.0,
            w_yaw: 0.5,
            w_slack: 1e3,
            n_ctrl_select: 2,
            max_iters: 30,
            shrink: 0.5,
            alpha_floor: 1.0 / 64.0,
            min_interval: 1e-5,
            target_clearance: 0.02,
        }
    }
}

impl RefineConfig {
    pub fn verify_config(&self) -> VerifyConfig {
        VerifyConfig {
            min_interval: self.min_interval,
            margin: self.margin,
            ..Default::default()
        }
    }
}

/// First-order model of one hyperplane at `t*`: gradients with respect to
/// the selected position and yaw control points, plus the current value.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedConstraint {
    pub position: Vec<Vector2<f64>>,
    pub yaw: Vec<f64>,
    pub value: f64,
}

/// Internal control point indices with the largest Bernstein weight at `t`,
/// in ascending index order.
pub(crate) fn select_controls(k: usize, t: f64, n: usize) -> Vec<usize> {
    let b = bernstein_basis(k, t);
    let mut idx: Vec<usize> = (1..k).collect();
    idx.sort_by(|&i, &j| b[j].total_cmp(&b[i]).then(i.cmp(&j)));
    idx.truncate(n);
    idx.sort_unstable();
    idx
}

/// Linearizes every hyperplane listed in `cert` at its worst time.
pub fn linearize(
    traj: &PoseTrajectory,
    cert: &SafetyCertificate,
    region: &ConvexRegion,
    body: &ConvexBody,
    controls: &[usize],
) -> Vec<LinearizedConstraint> {
    let t = cert.worst_time;
    let b = bernstein_basis(traj.degree(), t);
    let dr = rotation_derivative(traj.yaw.eval(t)[0]);
    cert.violated_hyperplanes
        .iter()
        .zip(&cert.violated_values)
        .zip(&cert.active_vertices)
        .map(|((&l, &g), &j)| {
            let a = region.halfspaces()[l].normal;
            let dyaw = a.dot(&(dr * body.vertices()[j]));
            LinearizedConstraint {
                position: controls.iter().map(|&i| a * b[i]).collect(),
                yaw: controls.iter().map(|&i| b[i] * dyaw).collect(),
                value: g,
            }
        })
        .collect()
}

/// `min ‖δp‖²_Wp + ‖δθ‖²_Wθ + w_s s²  s.t.  ∇gᵀδ - s <= -g - m, |δ| <= ρ, s >= 0`.
///
/// Variables are ordered `[p_0x, p_0y, p_1x, …, θ_0, θ_1, …, s]`.
pub fn refinement_qp(
    rows: &[LinearizedConstraint],
    n_pos: usize,
    n_yaw: usize,
    cfg: &RefineConfig,
) -> QuadraticProgram {
    let n = 2 * n_pos + n_yaw + 1;
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = 2.0
            * if i < 2 * n_pos {
                cfg.w_position
            } else if i < n - 1 {
                cfg.w_yaw
            } else {
                cfg.w_slack
            };
    }
    let mut c = DMatrix::zeros(rows.len(), n);
    let mut d = DVector::zeros(rows.len());
    for (r, row) in rows.iter().enumerate() {
        for (i, g) in row.position.iter().enumerate() {
            c[(r, 2 * i)] = g.x;
            c[(r, 2 * i + 1)] = g.y;
        }
        for (i, g) in row.yaw.iter().enumerate() {
            c[(r, 2 * n_pos + i)] = *g;
        }
        c[(r, n - 1)] = -1.0;
        d[r] = -row.value - cfg.margin;
    }
    let rho = cfg.trust_radius;
    let mut bounds = vec![(-rho, rho); n];
    bounds[n - 1] = (0.0, f64::INFINITY);
    QuadraticProgram::new(h, DVector::zeros(n))
        .with_inequalities(c, d)
        .with_bounds(bounds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub trajectory: PoseTrajectory,
    pub accepted: bool,
    /// Certificate of `trajectory` when accepted, `None` otherwise.
    pub certificate: Option<SafetyCertificate>,
    pub alpha: f64,
}

fn apply(
    traj: &PoseTrajectory,
    controls: &[usize],
    delta: &DVector<f64>,
    alpha: f64,
) -> PoseTrajectory {
    let mut out = traj.clone();
    let n = controls.len();
    let pos = out.position.control_points_mut();
    for (s, &i) in controls.iter().enumerate() {
        pos[i][0] += alpha * delta[2 * s];
        pos[i][1] += alpha * delta[2 * s + 1];
    }
    let yaw = out.yaw.control_points_mut();
    for (s, &i) in controls.iter().enumerate() {
        yaw[i][0] += alpha * delta[2 * n + s];
    }
    out
}

/// One QP step with backtracking. Only internal control points move.
pub fn refine_step(
    traj: &PoseTrajectory,
    cert: &SafetyCertificate,
    region: &ConvexRegion,
    body: &ConvexBody,
    cfg: &RefineConfig,
) -> RefineOutcome {
    let rejected = RefineOutcome {
        trajectory: traj.clone(),
        accepted: false,
        certificate: None,
        alpha: 0.0,
    };
    let controls = select_controls(traj.degree(), cert.worst_time, cfg.n_ctrl_select);
    if controls.is_empty() {
        return rejected;
    }
    let rows = linearize(traj, cert, region, body, &controls);
    let qp = refinement_qp(&rows, controls.len(), controls.len(), cfg);
    let Ok(report) = solve_qp(&qp) else {
        return rejected;
    };
    if report.status != SolveStatus::Optimal {
        return rejected;
    }
    let n = report.solution.len();
    let delta = DVector::from_column_slice(&report.solution[..n - 1]);
    if delta.amax() <= 1e-15 {
        return rejected;
    }
    let before = cert.worst_violation();
    let vcfg = cfg.verify_config();
    let mut alpha = 1.0;
    while alpha >= cfg.alpha_floor {
        let cand = apply(traj, &controls, &delta, alpha);
        let (c, _) = verify_continuous_with(&cand, region, body, &vcfg);
        if c.worst_violation() < before {
            return RefineOutcome {
                trajectory: cand,
                accepted: true,
                certificate: Some(c),
                alpha,
            };
        }
        alpha *= cfg.shrink;
    }
    rejected
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafeTrajectory {
    pub trajectory: PoseTrajectory,
    pub certificate: SafetyCertificate,
    pub target: TargetPose,
    pub refine_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenerateFailure {
    #[error("no sampled heading fits the region")]
    NoFeasibleOrientation,
    #[error("refinement stalled after {0} iterations")]
    Stalled(usize),
    #[error("verification was inconclusive after {0} iterations")]
    Inconclusive(usize),
    #[error("no safe trajectory within {0} iterations")]
    IterationLimit(usize),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Target selection followed by [`generate_safe_to`].
pub fn generate_safe(
    region: &ConvexRegion,
    body: &ConvexBody,
    e: &UnitDirection,
    start: &Pose,
    cfg: &RefineConfig,
    k: usize,
    n_yaw: usize,
) -> Result<SafeTrajectory, GenerateFailure> {
    let target =
        select_target_pose_with_clearance(region, body, e, start, n_yaw, cfg.target_clearance)
            .map_err(|err| match err {
                TrajectoryError::NoFeasibleOrientation => GenerateFailure::NoFeasibleOrientation,
                other => GenerateFailure::Trajectory(other),
            })?;
    generate_safe_to(region, body, start, target, cfg, k)
}

/// Straight initialization to `target`, then up to `max_iters` rounds of
/// verification and refinement.
pub fn generate_safe_to(
    region: &ConvexRegion,
    body: &ConvexBody,
    start: &Pose,
    target: TargetPose,
    cfg: &RefineConfig,
    k: usize,
) -> Result<SafeTrajectory, GenerateFailure> {
    let vcfg = cfg.verify_config();
    let mut traj = init_trajectory(start, &target.pose, k);
    let (mut cert, _) = verify_continuous_with(&traj, region, body, &vcfg);
    for iter in 0..=cfg.max_iters {
        match cert.verdict {
            Verdict::Safe => {
                return Ok(SafeTrajectory {
                    trajectory: traj,
                    certificate: cert,
                    target,
                    refine_iterations: iter,
                })
            }
            Verdict::Inconclusive => return Err(GenerateFailure::Inconclusive(iter)),
            Verdict::Violated if iter == cfg.max_iters => break,
            Verdict::Violated => {}
        }
        let out = refine_step(&traj, &cert, region, body, cfg);
        if !out.accepted {
            return Err(GenerateFailure::Stalled(iter));
        }
        let next = out.certificate.expect("accepted steps carry a certificate");
        debug_assert!(next.worst_violation() < cert.worst_violation());
        traj = out.trajectory;
        cert = next;
    }
    Err(GenerateFailure::IterationLimit(cfg.max_iters))
}
