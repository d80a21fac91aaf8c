//! Bézier pose trajectories, continuous verification and local refinement.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{support_value, ConvexBody, ConvexRegion, Pose, Violation};
use crate::solvers::SolverError;

mod refine;
mod target;
mod verify;

pub use refine::{
    generate_safe, generate_safe_to, linearize, refine_step, refinement_qp, GenerateFailure,
    LinearizedConstraint, RefineConfig, RefineOutcome, SafeTrajectory,
};
pub use target::{select_target_pose, select_target_pose_with_clearance, TargetPose};
pub use verify::{
    verify_continuous, verify_continuous_with, IntervalBound, SafetyCertificate, Verdict,
    VerifyConfig,
};

pub const DEFAULT_DEGREE: usize = 5;
pub const DEFAULT_YAW_SAMPLES: usize = 36;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("a curve needs at least two control points")]
    TooFewControlPoints,
    #[error("control points must be finite")]
    NonFinite,
    #[error("position degree {0} differs from yaw degree {1}")]
    DegreeMismatch(usize, usize),
    #[error("no sampled heading fits the body inside the region")]
    NoFeasibleOrientation,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Bernstein weights `C(k,i) tⁱ (1-t)^(k-i)`, built by the triangular recurrence.
pub fn bernstein_basis(k: usize, t: f64) -> Vec<f64> {
    let mut b = vec![0.0; k + 1];
    b[0] = 1.0;
    let s = 1.0 - t;
    for j in 1..=k {
        let mut carry = 0.0;
        for bi in b.iter_mut().take(j) {
            let old = *bi;
            *bi = carry + s * old;
            carry = t * old;
        }
        b[j] = carry;
    }
    b
}

#[derive(Debug, Clone, PartialEq)]
pub struct BezierCurve<const D: usize> {
    points: Vec<[f64; D]>,
}

impl<const D: usize> BezierCurve<D> {
    pub fn new(points: Vec<[f64; D]>) -> Result<Self, TrajectoryError> {
        if points.len() < 2 {
            return Err(TrajectoryError::TooFewControlPoints);
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(TrajectoryError::NonFinite);
        }
        Ok(Self { points })
    }

    pub fn degree(&self) -> usize {
        self.points.len() - 1
    }

    pub fn control_points(&self) -> &[[f64; D]] {
        &self.points
    }

    pub(crate) fn control_points_mut(&mut self) -> &mut [[f64; D]] {
        &mut self.points
    }

    /// De Casteljau evaluation; exact at `t = 0` and `t = 1`.
    pub fn eval(&self, t: f64) -> [f64; D] {
        let mut w = self.points.clone();
        let s = 1.0 - t;
        for r in 1..w.len() {
            for i in 0..w.len() - r {
                for d in 0..D {
                    w[i][d] = s * w[i][d] + t * w[i + 1][d];
                }
            }
        }
        w[0]
    }

    /// Largest Euclidean distance between consecutive control points.
    pub fn max_step(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                (0..D)
                    .map(|d| (w[1][d] - w[0][d]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Bound on `‖dc/dt‖` over `[0, 1]` from the hodograph.
    pub fn speed_bound(&self) -> f64 {
        self.degree() as f64 * self.max_step()
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self { points }
    }
}

/// Position and yaw curves sharing the parameter `t ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseTrajectory {
    pub position: BezierCurve<2>,
    pub yaw: BezierCurve<1>,
}

impl PoseTrajectory {
    pub fn new(position: BezierCurve<2>, yaw: BezierCurve<1>) -> Result<Self, TrajectoryError> {
        if position.degree() != yaw.degree() {
            return Err(TrajectoryError::DegreeMismatch(
                position.degree(),
                yaw.degree(),
            ));
        }
        Ok(Self { position, yaw })
    }

    pub fn degree(&self) -> usize {
        self.position.degree()
    }

    pub fn pose_at(&self, t: f64) -> Pose {
        let [x, y] = self.position.eval(t);
        Pose::new(x, y, self.yaw.eval(t)[0])
    }

    pub fn start(&self) -> Pose {
        let [x, y] = self.position.points[0];
        Pose::new(x, y, self.yaw.points[0][0])
    }

    pub fn end(&self) -> Pose {
        let k = self.degree();
        let [x, y] = self.position.points[k];
        Pose::new(x, y, self.yaw.points[k][0])
    }

    /// Same path traversed from end to start.
    pub fn reversed(&self) -> Self {
        Self {
            position: self.position.reversed(),
            yaw: self.yaw.reversed(),
        }
    }

    /// Polyline length with `samples` uniform segments.
    pub fn path_length(&self, samples: usize) -> f64 {
        let mut prev = self.position.eval(0.0);
        let mut len = 0.0;
        for i in 1..=samples {
            let p = self.position.eval(i as f64 / samples as f64);
            len += ((p[0] - prev[0]).powi(2) + (p[1] - prev[1]).powi(2)).sqrt();
            prev = p;
        }
        len
    }
}

#[derive(Serialize, Deserialize)]
struct TrajectoryJson {
    degree: usize,
    position: Vec<[f64; 2]>,
    yaw: Vec<f64>,
}

impl Serialize for PoseTrajectory {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TrajectoryJson {
            degree: self.degree(),
            position: self.position.points.clone(),
            yaw: self.yaw.points.iter().map(|p| p[0]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PoseTrajectory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let j = TrajectoryJson::deserialize(d)?;
        if j.position.len() != j.degree + 1 {
            return Err(D::Error::custom("position length does not match degree"));
        }
        let position = BezierCurve::new(j.position).map_err(D::Error::custom)?;
        let yaw =
            BezierCurve::new(j.yaw.into_iter().map(|v| [v]).collect()).map_err(D::Error::custom)?;
        PoseTrajectory::new(position, yaw).map_err(D::Error::custom)
    }
}

/// Wraps an angle to `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Straight-line control polygon from `start` to `target`. The target yaw is
/// replaced by its representative within π of the start yaw.
pub fn init_trajectory(start: &Pose, target: &Pose, k: usize) -> PoseTrajectory {
    let k = k.max(1);
    let yaw_end = start.heading + wrap_angle(target.heading - start.heading);
    let d = target.position - start.position;
    let mut pos = Vec::with_capacity(k + 1);
    let mut yaw = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let s = i as f64 / k as f64;
        if i == 0 {
            pos.push([start.position.x, start.position.y]);
            yaw.push([start.heading]);
        } else if i == k {
            pos.push([target.position.x, target.position.y]);
            yaw.push([yaw_end]);
        } else {
            pos.push([start.position.x + s * d.x, start.position.y + s * d.y]);
            yaw.push([start.heading + s * (yaw_end - start.heading)]);
        }
    }
    PoseTrajectory {
        position: BezierCurve { points: pos },
        yaw: BezierCurve { points: yaw },
    }
}

/// `g_k(t) = a_k·p(t) + max_j a_k·R(θ(t)) v_j - b_k` for every halfspace.
pub fn violation(
    traj: &PoseTrajectory,
    region: &ConvexRegion,
    body: &ConvexBody,
    t: f64,
) -> Violation {
    let pose = traj.pose_at(t);
    crate::geometry::halfspace_violation(region, body, &pose)
}

/// Support vertex index per halfspace at parameter `t`.
pub(crate) fn active_vertices(
    traj: &PoseTrajectory,
    region: &ConvexRegion,
    body: &ConvexBody,
    t: f64,
) -> Vec<usize> {
    let th = traj.yaw.eval(t)[0];
    region
        .halfspaces()
        .iter()
        .map(|h| support_value(body, th, &h.normal).vertex)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzConstants {
    pub per_halfspace: Vec<f64>,
    pub global: f64,
    pub position_rate: f64,
    pub yaw_rate: f64,
}

pub fn lipschitz_constants(
    traj: &PoseTrajectory,
    region: &ConvexRegion,
    body: &ConvexBody,
) -> LipschitzConstants {
    let vp = traj.position.speed_bound();
    let vt = traj.yaw.speed_bound();
    let rate = vp + body.circumradius() * vt;
    let per_halfspace: Vec<f64> = region
        .halfspaces()
        .iter()
        .map(|h| h.norm() * rate)
        .collect();
    LipschitzConstants {
        per_halfspace,
        global: region.max_normal_norm() * rate,
        position_rate: vp,
        yaw_rate: vt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{halfspace_violation, Halfspace, Point};
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector2;
    use proptest::prelude::*;

    #[test]
    fn basis_examples() {
        let b = bernstein_basis(2, 0.5);
        assert_abs_diff_eq!(b.as_slice(), [0.25, 0.5, 0.25].as_slice(), epsilon = 1e-15);
        assert_eq!(bernstein_basis(5, 0.0), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(bernstein_basis(5, 1.0)[5], 1.0);
    }

    #[test]
    fn init_examples() {
        let t = init_trajectory(&Pose::new(0.0, 0.0, 0.0), &Pose::new(1.0, 0.0, 0.0), 5);
        for (i, p) in t.position.control_points().iter().enumerate() {
            assert_abs_diff_eq!(p[0], i as f64 / 5.0, epsilon = 1e-15);
            assert_eq!(p[1], 0.0);
        }
        assert!(t.yaw.control_points().iter().all(|v| v[0] == 0.0));

        let t = init_trajectory(
            &Pose::new(0.0, 0.0, 0.1),
            &Pose::new(0.0, 0.0, 2.0 * PI - 0.1),
            5,
        );
        assert_abs_diff_eq!(t.end().heading, -0.1, epsilon = 1e-12);

        let s = Pose::new(1.0, 2.0, 0.3);
        let t = init_trajectory(&s, &s, 5);
        assert!(t.position.control_points().iter().all(|p| *p == [1.0, 2.0]));
        assert!(t.yaw.control_points().iter().all(|p| *p == [0.3]));
    }

    #[test]
    fn stationary_violation_is_constant() {
        let region = ConvexRegion::axis_box(-1.0, 1.0, -1.0, 1.0).unwrap();
        let body = ConvexBody::square(0.2).unwrap();
        let pose = Pose::new(0.0, 0.0, 0.0);
        let t = init_trajectory(&pose, &pose, 5);
        for i in 0..=10 {
            assert_abs_diff_eq!(
                violation(&t, &region, &body, i as f64 / 10.0).worst,
                -0.8,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn start_matches_static_check() {
        let region = ConvexRegion::axis_box(-1.0, 2.0, -1.0, 1.5).unwrap();
        let body = ConvexBody::rectangle(0.6, 0.4).unwrap();
        let s = Pose::new(0.1, 0.2, 0.7);
        let t = init_trajectory(&s, &Pose::new(1.0, 0.5, -0.4), 5);
        assert_eq!(
            violation(&t, &region, &body, 0.0),
            halfspace_violation(&region, &body, &s)
        );
    }

    #[test]
    fn lipschitz_examples() {
        let region =
            ConvexRegion::new(vec![Halfspace::new(Vector2::new(1.0, 0.0), 5.0).unwrap()]).unwrap();
        let body = ConvexBody::square(0.1).unwrap();
        let s = Pose::new(0.0, 0.0, 0.0);
        let l = lipschitz_constants(&init_trajectory(&s, &s, 5), &region, &body);
        assert_eq!(l.global, 0.0);
        let line = PoseTrajectory::new(
            BezierCurve::new(vec![[0.0, 0.0], [1.0, 0.0]]).unwrap(),
            BezierCurve::new(vec![[0.0], [0.0]]).unwrap(),
        )
        .unwrap();
        let l = lipschitz_constants(&line, &region, &body);
        assert_abs_diff_eq!(l.per_halfspace[0], 1.0);
    }

    #[test]
    fn json_shape() {
        let t = init_trajectory(&Pose::new(0.0, 0.0, 0.0), &Pose::new(1.0, 0.5, 0.2), 3);
        let j = serde_json::to_value(&t).unwrap();
        assert_eq!(j["degree"], 3);
        assert_eq!(j["position"].as_array().unwrap().len(), 4);
        let back: PoseTrajectory = serde_json::from_value(j).unwrap();
        assert_eq!(back, t);
        let p: Point = Point::new(back.end().position.x, back.end().position.y);
        assert_abs_diff_eq!(p.x, 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn partition_of_unity(k in 1usize..12, t in 0.0f64..=1.0) {
            let s: f64 = bernstein_basis(k, t).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn casteljau_matches_basis_sum(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..9),
            t in 0.0f64..=1.0,
        ) {
            let c = BezierCurve::new(pts.iter().map(|&(x, y)| [x, y]).collect()).unwrap();
            let b = bernstein_basis(c.degree(), t);
            let direct = c.control_points().iter().zip(&b).fold([0.0, 0.0], |acc, (p, w)| {
                [acc[0] + w * p[0], acc[1] + w * p[1]]
            });
            let e = c.eval(t);
            prop_assert!((e[0] - direct[0]).abs() <= 1e-12 && (e[1] - direct[1]).abs() <= 1e-12);
        }

        #[test]
        fn per_halfspace_constant_below_global(
            k in 1usize..7,
            seed in prop::collection::vec(-2.0f64..2.0, 40),
        ) {
            let pos: Vec<[f64; 2]> = (0..=k).map(|i| [seed[2 * i], seed[2 * i + 1]]).collect();
            let yaw: Vec<[f64; 1]> = (0..=k).map(|i| [seed[20 + i]]).collect();
            let traj = PoseTrajectory::new(BezierCurve::new(pos).unwrap(), BezierCurve::new(yaw).unwrap()).unwrap();
            let hs = (0..4)
                .map(|i| {
                    let a = Vector2::new(seed[30 + i], seed[34 + i]);
                    Halfspace::new(if a.norm() < 1e-3 { Vector2::new(1.0, 0.0) } else { a }, 10.0).unwrap()
                })
                .collect();
            let Ok(region) = ConvexRegion::new(hs) else { return Ok(()) };
            let body = ConvexBody::rectangle(0.6, 0.4).unwrap();
            let l = lipschitz_constants(&traj, &region, &body);
            let amax = region.max_normal_norm();
            for (lk, h) in l.per_halfspace.iter().zip(region.halfspaces()) {
                prop_assert!(*lk <= l.global);
                if h.norm() == amax {
                    prop_assert_eq!(*lk, l.global);
                }
            }
        }
    }
}
