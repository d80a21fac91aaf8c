//! Planar geometric primitives shared by every other module.
//!
//! Conventions:
//! - A [`Halfspace`] is `{x : a·x <= b}`. Normals are kept at the scale they were
//!   produced with; nothing here normalizes them.
//! - Body vertices are in the body frame, counterclockwise, and the body-frame
//!   origin is the reference point that "robot position" refers to.
//! - Support argmax ties resolve to the lowest vertex index.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solvers;

pub type Point = Vector2<f64>;

const UNIT_TOL: f64 = 1e-9;
const COLLINEAR_TOL: f64 = 1e-9;
const MIN_NORMAL_NORM: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("direction has zero or non-finite length")]
    DegenerateDirection,
    #[error("convex body needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error(
        "convex body vertices are not strictly convex in counterclockwise order (at vertex {0})"
    )]
    NotStrictlyConvex(usize),
    #[error("body-frame origin is not strictly inside the convex body")]
    OriginNotInterior,
    #[error("halfspace normal is (nearly) zero")]
    ZeroNormal,
    #[error("non-finite value in geometric input")]
    NonFinite,
    #[error("region has an empty interior")]
    EmptyRegion,
}

/// Unit vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct UnitDirection(Vector2<f64>);

impl UnitDirection {
    /// Normalizes `v`. Fails on zero or non-finite input.
    pub fn new(v: Vector2<f64>) -> Result<Self, GeometryError> {
        let n = v.norm();
        if !n.is_finite() || n <= f64::EPSILON {
            return Err(GeometryError::DegenerateDirection);
        }
        Ok(Self(v / n))
    }

    pub fn from_angle(angle: f64) -> Self {
        Self(Vector2::new(angle.cos(), angle.sin()))
    }

    pub fn x() -> Self {
        Self(Vector2::new(1.0, 0.0))
    }

    #[inline]
    pub fn vector(&self) -> Vector2<f64> {
        self.0
    }

    pub fn angle(&self) -> f64 {
        self.0.y.atan2(self.0.x)
    }

    pub fn is_unit(&self) -> bool {
        (self.0.norm() - 1.0).abs() <= UNIT_TOL
    }
}

impl TryFrom<[f64; 2]> for UnitDirection {
    type Error = GeometryError;

    /// Keeps vectors that are already unit so stored directions round-trip.
    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        let d = Self(Vector2::new(v[0], v[1]));
        if d.0.iter().all(|x| x.is_finite()) && d.is_unit() {
            Ok(d)
        } else {
            Self::new(d.0)
        }
    }
}

impl From<UnitDirection> for [f64; 2] {
    fn from(d: UnitDirection) -> Self {
        [d.0.x, d.0.y]
    }
}

/// Position of the body reference point plus an unwrapped heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Point,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Point::new(x, y),
            heading,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.x.is_finite() && self.position.y.is_finite() && self.heading.is_finite()
    }
}

/// Convex polygon in the body frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexBody {
    vertices: Vec<Point>,
}

impl ConvexBody {
    /// Validates counterclockwise strict convexity and that the origin is interior.
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        if vertices
            .iter()
            .any(|v| !v.x.is_finite() || !v.y.is_finite())
        {
            return Err(GeometryError::NonFinite);
        }
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if cross(b - a, c - b) <= COLLINEAR_TOL {
                return Err(GeometryError::NotStrictlyConvex((i + 1) % n));
            }
        }
        // Turning number must be one, otherwise a star polygon passes the local test.
        let mut turn = 0.0;
        for i in 0..n {
            let e0 = vertices[(i + 1) % n] - vertices[i];
            let e1 = vertices[(i + 2) % n] - vertices[(i + 1) % n];
            turn += cross(e0, e1).atan2(e0.dot(&e1));
        }
        if (turn - std::f64::consts::TAU).abs() > 1e-6 {
            return Err(GeometryError::NotStrictlyConvex(0));
        }
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            if cross(b - a, -a) <= COLLINEAR_TOL {
                return Err(GeometryError::OriginNotInterior);
            }
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle centered on the origin, `length` along body x.
    pub fn rectangle(length: f64, width: f64) -> Result<Self, GeometryError> {
        let (hx, hy) = (0.5 * length, 0.5 * width);
        Self::new(vec![
            Point::new(hx, -hy),
            Point::new(hx, hy),
            Point::new(-hx, hy),
            Point::new(-hx, -hy),
        ])
    }

    /// Axis-aligned square with half-side `half`.
    pub fn square(half: f64) -> Result<Self, GeometryError> {
        Self::rectangle(2.0 * half, 2.0 * half)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// `max_j ||v_j||`.
    pub fn circumradius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Distance from the reference point to the nearest edge line.
    pub fn inradius(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                cross(b - a, -a) / (b - a).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn world_vertices(&self, pose: &Pose) -> Vec<Point> {
        let r = rotation(pose.heading);
        self.vertices
            .iter()
            .map(|v| pose.position + r * v)
            .collect()
    }

    /// True when `p` lies strictly inside the body placed at `pose`.
    pub fn contains_strictly(&self, pose: &Pose, p: &Point) -> bool {
        let w = self.world_vertices(pose);
        let n = w.len();
        (0..n).all(|i| cross(w[(i + 1) % n] - w[i], p - w[i]) > 0.0)
    }
}

impl<'de> Deserialize<'de> for ConvexBody {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            vertices: Vec<Point>,
        }
        let raw = Raw::deserialize(d)?;
        ConvexBody::new(raw.vertices).map_err(serde::de::Error::custom)
    }
}

/// `{x : normal·x <= offset}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vector2<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vector2<f64>, offset: f64) -> Result<Self, GeometryError> {
        if !normal.x.is_finite() || !normal.y.is_finite() || !offset.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if normal.norm() <= MIN_NORMAL_NORM {
            return Err(GeometryError::ZeroNormal);
        }
        Ok(Self { normal, offset })
    }

    /// Signed value `a·x - b`; nonpositive on the safe side.
    #[inline]
    pub fn eval(&self, x: &Point) -> f64 {
        self.normal.dot(x) - self.offset
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.normal.norm()
    }
}

/// Intersection of halfspaces with a nonempty interior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexRegion {
    halfspaces: Vec<Halfspace>,
}

impl ConvexRegion {
    pub fn new(halfspaces: Vec<Halfspace>) -> Result<Self, GeometryError> {
        if halfspaces.is_empty() || solvers::feasibility_check(&halfspaces).is_none() {
            return Err(GeometryError::EmptyRegion);
        }
        Ok(Self { halfspaces })
    }

    /// Axis-aligned box `[x0, x1] × [y0, y1]` with unit normals, ordered +x, -x, +y, -y.
    pub fn axis_box(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self, GeometryError> {
        Self::new(vec![
            Halfspace::new(Vector2::new(1.0, 0.0), x1)?,
            Halfspace::new(Vector2::new(-1.0, 0.0), -x0)?,
            Halfspace::new(Vector2::new(0.0, 1.0), y1)?,
            Halfspace::new(Vector2::new(0.0, -1.0), -y0)?,
        ])
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn len(&self) -> usize {
        self.halfspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.halfspaces.is_empty()
    }

    pub fn max_normal_norm(&self) -> f64 {
        self.halfspaces
            .iter()
            .map(Halfspace::norm)
            .fold(0.0, f64::max)
    }

    /// Same region with every normal scaled to unit length, so that
    /// halfspace values read as signed distances.
    pub fn normalized(&self) -> ConvexRegion {
        ConvexRegion {
            halfspaces: self
                .halfspaces
                .iter()
                .map(|h| {
                    let n = h.norm();
                    Halfspace {
                        normal: h.normal / n,
                        offset: h.offset / n,
                    }
                })
                .collect(),
        }
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.eval(x) <= tol)
    }

    /// Polygon vertices (counterclockwise) by pairwise boundary intersection.
    ///
    /// Returns an empty list for unbounded regions.
    pub fn polygon(&self) -> Vec<Point> {
        let hs = &self.halfspaces;
        let mut pts: Vec<Point> = Vec::new();
        for i in 0..hs.len() {
            for j in (i + 1)..hs.len() {
                let m = Matrix2::new(
                    hs[i].normal.x,
                    hs[i].normal.y,
                    hs[j].normal.x,
                    hs[j].normal.y,
                );
                let det = m.determinant();
                let scale = hs[i].norm() * hs[j].norm();
                if det.abs() <= 1e-12 * scale {
                    continue;
                }
                let Some(inv) = m.try_inverse() else { continue };
                let p = inv * Vector2::new(hs[i].offset, hs[j].offset);
                let ok = hs
                    .iter()
                    .all(|h| h.eval(&p) <= 1e-9 * h.norm().max(1.0) * (1.0 + p.norm()));
                if ok && !pts.iter().any(|q| (q - p).norm() < 1e-9) {
                    pts.push(p);
                }
            }
        }
        if pts.len() < 3 {
            return Vec::new();
        }
        let c = pts.iter().fold(Point::zeros(), |acc, p| acc + p) / pts.len() as f64;
        pts.sort_by(|a, b| {
            let ta = (a.y - c.y).atan2(a.x - c.x);
            let tb = (b.y - c.y).atan2(b.x - c.x);
            ta.total_cmp(&tb)
        });
        pts
    }
}

impl<'de> Deserialize<'de> for ConvexRegion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            halfspaces: Vec<Halfspace>,
        }
        let raw = Raw::deserialize(d)?;
        ConvexRegion::new(raw.halfspaces).map_err(serde::de::Error::custom)
    }
}

#[inline]
pub fn cross(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

#[inline]
pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// `dR/dθ`.
#[inline]
pub fn rotation_derivative(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(-s, -c, c, -s)
}

/// Support value with the vertex that attains it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub value: f64,
    pub vertex: usize,
}

/// `max_j a·(R(theta) v_j)`, lowest index on ties.
pub fn support_value(body: &ConvexBody, theta: f64, a: &Vector2<f64>) -> Support {
    // a·(R v) = (Rᵀ a)·v, so rotate the functional once instead of every vertex.
    let ra = rotation(theta).transpose() * a;
    support_in_body_frame(body, &ra)
}

/// Support value for a functional already expressed in the body frame.
#[inline]
pub(crate) fn support_in_body_frame(body: &ConvexBody, a_body: &Vector2<f64>) -> Support {
    let mut best = Support {
        value: f64::NEG_INFINITY,
        vertex: 0,
    };
    for (j, v) in body.vertices.iter().enumerate() {
        let s = a_body.dot(v);
        if s > best.value {
            best = Support {
                value: s,
                vertex: j,
            };
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub worst: f64,
    pub per_halfspace: Vec<f64>,
}

/// Static containment test: `worst <= 0` iff the whole body at `pose` is inside `region`.
pub fn halfspace_violation(region: &ConvexRegion, body: &ConvexBody, pose: &Pose) -> Violation {
    let rt = rotation(pose.heading).transpose();
    let per_halfspace: Vec<f64> = region
        .halfspaces
        .iter()
        .map(|h| {
            h.normal.dot(&pose.position) + support_in_body_frame(body, &(rt * h.normal)).value
                - h.offset
        })
        .collect();
    let worst = per_halfspace
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Violation {
        worst,
        per_halfspace,
    }
}

/// Euclidean distance from `p` to the polygon (zero inside).
pub fn point_polygon_distance(polygon: &[Point], p: &Point) -> f64 {
    let n = polygon.len();
    let inside = (0..n).all(|i| cross(polygon[(i + 1) % n] - polygon[i], p - polygon[i]) >= 0.0);
    if inside {
        return 0.0;
    }
    (0..n)
        .map(|i| point_segment_distance(&polygon[i], &polygon[(i + 1) % n], p))
        .fold(f64::INFINITY, f64::min)
}

pub fn point_segment_distance(a: &Point, b: &Point, p: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + ab * t - p).norm()
}

/// `radius - dist(center, body at pose)`; positive means the disc penetrates the body.
pub fn polygon_circle_penetration(
    body: &ConvexBody,
    pose: &Pose,
    center: &Point,
    radius: f64,
) -> f64 {
    radius - point_polygon_distance(&body.world_vertices(pose), center)
}
