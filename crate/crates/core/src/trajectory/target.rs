use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::TrajectoryError;
use crate::geometry::{support_value, ConvexBody, ConvexRegion, Point, Pose, UnitDirection};
use crate::solvers::{solve_lp, LinearProgram, SolveStatus};

const PROGRESS_TIE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPose {
    pub pose: Pose,
    pub progress: f64,
}

pub fn select_target_pose(
    region: &ConvexRegion,
    body: &ConvexBody,
    e: &UnitDirection,
    current: &Pose,
    n_yaw: usize,
) -> Result<TargetPose, TrajectoryError> {
    select_target_pose_with_clearance(region, body, e, current, n_yaw, 0.0)
}

/// Farthest pose along `e` over sampled headings.
///
/// Each halfspace is tightened by `clearance` (in distance units), so a
/// positive value keeps the target strictly inside the region.
pub fn select_target_pose_with_clearance(
    region: &ConvexRegion,
    body: &ConvexBody,
    e: &UnitDirection,
    current: &Pose,
    n_yaw: usize,
    clearance: f64,
) -> Result<TargetPose, TrajectoryError> {
    let hs = region.halfspaces();
    let a = DMatrix::from_fn(hs.len(), 2, |k, j| hs[k].normal[j]);
    let cost = DVector::from_column_slice(e.vector().as_slice());
    let mut offsets: Vec<f64> = (0..n_yaw.max(1))
        .map(|s| PI * (2.0 * s as f64 - n_yaw as f64) / n_yaw as f64)
        .collect();
    if !offsets.contains(&0.0) {
        offsets.push(0.0);
    }
    let mut best: Option<(f64, f64, Pose)> = None;
    for d in offsets {
        let heading = current.heading + d;
        let b = DVector::from_fn(hs.len(), |k, _| {
            hs[k].offset
                - support_value(body, heading, &hs[k].normal).value
                - clearance * hs[k].norm()
        });
        let lp = LinearProgram::new(cost.clone(), a.clone(), b);
        let report = solve_lp(&lp)?;
        if report.status != SolveStatus::Optimal {
            continue;
        }
        let p = Point::new(report.solution[0], report.solution[1]);
        let score = e.vector().dot(&p);
        let better = match best {
            None => true,
            Some((s, bd, _)) => {
                score > s + PROGRESS_TIE || (score >= s - PROGRESS_TIE && d.abs() < bd)
            }
        };
        if better {
            best = Some((
                score,
                d.abs(),
                Pose {
                    position: p,
                    heading,
                },
            ));
        }
    }
    let (_, _, pose) = best.ok_or(TrajectoryError::NoFeasibleOrientation)?;
    Ok(TargetPose {
        pose,
        progress: e.vector().dot(&(pose.position - current.position)),
    })
}
