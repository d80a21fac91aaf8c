//! Direction-aware convex free regions.
//!
//! Obstacle points are separated from the robot one at a time. Each
//! separating hyperplane passes through the selected point and comes from a
//! two-variable QP whose metric `Q = eeᵀ + λ(I - eeᵀ)` favours normals aligned
//! with the candidate direction `e`, so the region stays long along `e`.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    ConvexBody, ConvexRegion, GeometryError, Halfspace, Point, Pose, UnitDirection,
};
use crate::perception::DEFAULT_MAX_RANGE;
use crate::solvers::{solve_qp, QuadraticProgram, SolveReport, SolveStatus, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("obstacle point ({x:.4}, {y:.4}) cannot be separated from the robot")]
    InfeasibleSeparation { x: f64, y: f64 },
    #[error("robot at the generation pose is in collision with point ({x:.4}, {y:.4})")]
    InCollision { x: f64, y: f64 },
    #[error("separation needed more than {0} hyperplanes")]
    HyperplaneBudgetExceeded(usize),
    #[error("obstacle point coincides with the robot position")]
    PointAtRobot,
    #[error("hyperplane QP ended with status {0:?}")]
    Solver(SolveStatus),
    #[error(transparent)]
    SolverInput(#[from] SolverError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionGenConfig {
    /// Weight on the component of the normal orthogonal to `e`.
    pub lambda: f64,
    /// Clearance of every robot vertex from each hyperplane, in normal units.
    pub epsilon: f64,
    pub max_hyperplanes: usize,
    pub sensor_box_margin: f64,
    pub sensor_range: f64,
    /// When false, `Q = I` and the nearest point is always selected.
    pub direction_aware: bool,
}

impl Default for RegionGenConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            epsilon: 0.01,
            max_hyperplanes: 80,
            sensor_box_margin: 0.2,
            sensor_range: DEFAULT_MAX_RANGE,
            direction_aware: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub obstacle: Point,
    pub report: SolveReport,
    pub surviving: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionGenTrace {
    pub iterations: Vec<TraceRecord>,
}

/// Index of the forward point closest to the ray `p1 + t·e`, falling back to
/// the point nearest `p1` when nothing lies ahead. Lowest index on ties.
pub fn select_obstacle(points: &[Point], p1: &Point, e: &UnitDirection) -> usize {
    let ev = e.vector();
    let mut best: Option<(usize, f64)> = None;
    for (i, o) in points.iter().enumerate() {
        let d = o - p1;
        let along = ev.dot(&d);
        if along > 0.0 {
            let perp = (d - ev * along).norm();
            if best.is_none_or(|(_, b)| perp < b) {
                best = Some((i, perp));
            }
        }
    }
    best.map_or_else(|| select_nearest(points, p1), |(i, _)| i)
}

pub fn select_nearest(points: &[Point], p1: &Point) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, o) in points.iter().enumerate() {
        let d = (o - p1).norm_squared();
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

pub fn bias_matrix(e: &UnitDirection, lambda: f64) -> Matrix2<f64> {
    let ev = e.vector();
    let eet = ev * ev.transpose();
    eet + (Matrix2::identity() - eet) * lambda
}

/// Separating hyperplane through `o` with every robot vertex at least
/// `epsilon` (in normal units) on the safe side and `(p1 - o)·n = -1`.
pub fn compute_hyperplane(
    o: &Point,
    p1: &Point,
    world_vertices: &[Point],
    e: &UnitDirection,
    cfg: &RegionGenConfig,
) -> Result<(Halfspace, SolveReport), RegionError> {
    let rel = p1 - o;
    if rel.norm() <= 1e-12 {
        return Err(RegionError::PointAtRobot);
    }
    let q = if cfg.direction_aware {
        bias_matrix(e, cfg.lambda)
    } else {
        Matrix2::identity()
    };
    let h = DMatrix::from_fn(2, 2, |i, j| 2.0 * q[(i, j)]);
    let m = world_vertices.len();
    let c = DMatrix::from_fn(m, 2, |j, k| world_vertices[j][k] - o[k]);
    let d = DVector::from_element(m, -cfg.epsilon);
    let qp = QuadraticProgram::new(h, DVector::zeros(2))
        .with_inequalities(c, d)
        .with_equalities(
            DMatrix::from_row_slice(1, 2, &[rel.x, rel.y]),
            DVector::from_element(1, -1.0),
        );
    let report = solve_qp(&qp)?;
    match report.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            return Err(RegionError::InfeasibleSeparation { x: o.x, y: o.y })
        }
        s => return Err(RegionError::Solver(s)),
    }
    let n = Vector2::new(report.solution[0], report.solution[1]);
    let hs = Halfspace::new(n, n.dot(o))?;
    Ok((hs, report))
}

/// Axis-aligned box of half-width `sensor_range + sensor_box_margin` around `p1`.
pub fn sensor_box(p1: &Point, cfg: &RegionGenConfig) -> Vec<Halfspace> {
    let r = cfg.sensor_range + cfg.sensor_box_margin;
    vec![
        Halfspace {
            normal: Vector2::new(1.0, 0.0),
            offset: p1.x + r,
        },
        Halfspace {
            normal: Vector2::new(-1.0, 0.0),
            offset: -(p1.x - r),
        },
        Halfspace {
            normal: Vector2::new(0.0, 1.0),
            offset: p1.y + r,
        },
        Halfspace {
            normal: Vector2::new(0.0, -1.0),
            offset: -(p1.y - r),
        },
    ]
}

/// Builds a region that separates every point from the robot placed at
/// `(p1, heading)`.
///
/// A point counts as separated once it lies on or outside any halfspace; after
/// each new hyperplane every separated point is dropped.
pub fn generate_region(
    points: &[Point],
    p1: &Point,
    heading: f64,
    body: &ConvexBody,
    e: &UnitDirection,
    cfg: &RegionGenConfig,
) -> Result<(ConvexRegion, RegionGenTrace), RegionError> {
    generate_region_bounded(points, &[], p1, heading, body, e, cfg)
}

/// [`generate_region`] with extra fixed halfspaces added next to the sensor
/// box. Points already outside them need no hyperplane of their own.
pub fn generate_region_bounded(
    points: &[Point],
    bounds: &[Halfspace],
    p1: &Point,
    heading: f64,
    body: &ConvexBody,
    e: &UnitDirection,
    cfg: &RegionGenConfig,
) -> Result<(ConvexRegion, RegionGenTrace), RegionError> {
    let pose = Pose {
        position: *p1,
        heading,
    };
    let world = body.world_vertices(&pose);
    let mut halfspaces = sensor_box(p1, cfg);
    halfspaces.extend_from_slice(bounds);
    let mut remaining: Vec<Point> = points
        .iter()
        .filter(|o| halfspaces.iter().all(|h| h.eval(o) < 0.0))
        .copied()
        .collect();
    let mut trace = RegionGenTrace::default();
    while !remaining.is_empty() {
        if trace.iterations.len() >= cfg.max_hyperplanes {
            return Err(RegionError::HyperplaneBudgetExceeded(cfg.max_hyperplanes));
        }
        let idx = if cfg.direction_aware {
            select_obstacle(&remaining, p1, e)
        } else {
            select_nearest(&remaining, p1)
        };
        let o = remaining[idx];
        let (hs, report) = match compute_hyperplane(&o, p1, &world, e, cfg) {
            Ok(v) => v,
            Err(RegionError::InfeasibleSeparation { x, y }) => {
                return Err(RegionError::InCollision { x, y })
            }
            Err(err) => return Err(err),
        };
        remaining.swap_remove(idx);
        remaining.retain(|p| hs.eval(p) < 0.0);
        halfspaces.push(hs);
        trace.iterations.push(TraceRecord {
            obstacle: o,
            report,
            surviving: remaining.len(),
        });
    }
    Ok((ConvexRegion::new(halfspaces)?, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::halfspace_violation;
    use approx::assert_abs_diff_eq;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn forward_point_nearest_the_ray() {
        let pts = [p(2.0, 0.5), p(1.0, -2.0), p(-3.0, 0.0)];
        assert_eq!(select_obstacle(&pts, &p(0.0, 0.0), &UnitDirection::x()), 0);
        let behind = [p(-1.0, 0.0), p(-2.0, 1.0)];
        assert_eq!(
            select_obstacle(&behind, &p(0.0, 0.0), &UnitDirection::x()),
            0
        );
        assert_eq!(
            select_obstacle(&[p(-5.0, 3.0)], &p(0.0, 0.0), &UnitDirection::x()),
            0
        );
    }

    #[test]
    fn hyperplane_for_tiny_body_is_min_norm() {
        let body = ConvexBody::square(0.001).unwrap();
        let world = body.world_vertices(&Pose::new(0.0, 0.0, 0.0));
        let cfg = RegionGenConfig {
            lambda: 1.0,
            ..Default::default()
        };
        let (h, _) = compute_hyperplane(
            &p(2.0, 0.0),
            &p(0.0, 0.0),
            &world,
            &UnitDirection::x(),
            &cfg,
        )
        .unwrap();
        assert_abs_diff_eq!(h.normal.x, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(h.normal.y, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(h.offset / h.normal.x, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn hyperplane_square_ahead_and_beside() {
        let body = ConvexBody::square(0.2).unwrap();
        let world = body.world_vertices(&Pose::new(0.0, 0.0, 0.0));
        let cfg = RegionGenConfig::default();
        let (h, _) = compute_hyperplane(
            &p(1.0, 0.0),
            &p(0.0, 0.0),
            &world,
            &UnitDirection::x(),
            &cfg,
        )
        .unwrap();
        assert_abs_diff_eq!(h.normal.x, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(h.normal.y, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(h.offset, 1.0, epsilon = 1e-9);

        let (h, _) = compute_hyperplane(
            &p(0.0, 1.0),
            &p(0.0, 0.0),
            &world,
            &UnitDirection::x(),
            &cfg,
        )
        .unwrap();
        assert_abs_diff_eq!(h.normal.x, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(h.normal.y, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(h.offset, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn point_touching_body_is_infeasible() {
        let body = ConvexBody::square(0.2).unwrap();
        let world = body.world_vertices(&Pose::new(0.0, 0.0, 0.0));
        let r = compute_hyperplane(
            &p(0.15, 0.0),
            &p(0.0, 0.0),
            &world,
            &UnitDirection::x(),
            &RegionGenConfig::default(),
        );
        assert!(matches!(r, Err(RegionError::InfeasibleSeparation { .. })));
        let r = generate_region(
            &[p(0.1, 0.0)],
            &p(0.0, 0.0),
            0.0,
            &body,
            &UnitDirection::x(),
            &RegionGenConfig::default(),
        );
        assert!(matches!(r, Err(RegionError::InCollision { .. })));
    }

    #[test]
    fn empty_cloud_gives_sensor_box() {
        let body = ConvexBody::square(0.2).unwrap();
        let (r, t) = generate_region(
            &[],
            &p(1.0, 1.0),
            0.0,
            &body,
            &UnitDirection::x(),
            &RegionGenConfig::default(),
        )
        .unwrap();
        assert_eq!(r.len(), 4);
        assert!(t.iterations.is_empty());
        assert_abs_diff_eq!(r.halfspaces()[0].offset, 6.2);
    }

    #[test]
    fn single_point_region() {
        let body = ConvexBody::square(0.2).unwrap();
        let cfg = RegionGenConfig::default();
        let (r, _) = generate_region(
            &[p(2.0, 0.0)],
            &p(0.0, 0.0),
            0.0,
            &body,
            &UnitDirection::x(),
            &cfg,
        )
        .unwrap();
        assert_eq!(r.len(), 5);
        let h = r.halfspaces()[4];
        assert!(h.eval(&p(2.0, 0.0)) >= -1e-9);
        // x-intercept of the new boundary along the axis
        assert!(h.offset / h.normal.x <= 2.0 + 1e-9);
        let v = halfspace_violation(&r, &body, &Pose::new(0.0, 0.0, 0.0));
        assert!(v.worst <= -cfg.epsilon / r.max_normal_norm() + 1e-8);
    }

    #[test]
    fn dense_ring_is_fully_separated() {
        let body = ConvexBody::rectangle(0.6, 0.4).unwrap();
        let ring: Vec<Point> = (0..360)
            .map(|i| {
                let a = (i as f64).to_radians();
                p(1.5 * a.cos(), 1.5 * a.sin())
            })
            .collect();
        let cfg = RegionGenConfig::default();
        let (r, trace) =
            generate_region(&ring, &p(0.0, 0.0), 0.3, &body, &UnitDirection::x(), &cfg).unwrap();
        assert!(trace.iterations.len() <= cfg.max_hyperplanes);
        for o in &ring {
            assert!(r.halfspaces().iter().any(|h| h.eval(o) >= -1e-9));
        }
        let v = halfspace_violation(&r, &body, &Pose::new(0.0, 0.0, 0.3));
        assert!(v.worst < 0.0);
        let poly = r.polygon();
        assert!(poly.len() >= 3);
        assert!(poly.iter().all(|q| q.norm() <= 1.5 + 0.05));
        let surviving: Vec<usize> = trace.iterations.iter().map(|t| t.surviving).collect();
        assert!(surviving.windows(2).all(|w| w[1] < w[0]));
    }
}
