//! Simulated planar LiDAR, angular range map and gap-based direction extraction.
//!
//! Beam `i` of an `N`-beam scan points along the world-frame azimuth
//! `-π + 2πi/N`. Workspace walls are ranged like obstacles.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Halfspace, Point, Pose, UnitDirection};
use crate::harness::scene::Scene;

pub const DEFAULT_BEAMS: usize = 360;
pub const DEFAULT_MAX_RANGE: f64 = 5.0;
pub const DEFAULT_DEPTH_JUMP: f64 = 0.5;
pub const DEFAULT_MAX_DIRECTIONS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("scan origin ({x:.3}, {y:.3}) lies inside obstacle {index}")]
    PoseInsideObstacle { index: usize, x: f64, y: f64 },
    #[error("scan origin ({x:.3}, {y:.3}) lies outside the workspace")]
    PoseOutsideWorkspace { x: f64, y: f64 },
    #[error("a scan needs at least 8 beams, got {0}")]
    TooFewBeams(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeMap {
    pub ranges: Vec<f64>,
    pub max_range: f64,
    pub origin: Pose,
}

impl RangeMap {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn beam_spacing(&self) -> f64 {
        TAU / self.ranges.len() as f64
    }

    pub fn azimuth(&self, beam: usize) -> f64 {
        beam_azimuth(beam, self.ranges.len())
    }

    fn is_max(&self, i: usize) -> bool {
        self.ranges[i] >= self.max_range
    }
}

#[inline]
pub fn beam_azimuth(beam: usize, n: usize) -> f64 {
    -PI + TAU * beam as f64 / n as f64
}

/// World-frame hit points, one per beam that returned before `max_range`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point>,
    /// Beam index that produced each point.
    pub beams: Vec<usize>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Point>) -> Self {
        let beams = (0..points.len()).collect();
        Self { points, beams }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Distance along the ray from `origin` at `azimuth` to the first obstacle or
/// wall, clipped to `max_range`.
pub fn cast_ray(scene: &Scene, origin: &Point, azimuth: f64, max_range: f64) -> f64 {
    let dir = Vector2::new(azimuth.cos(), azimuth.sin());
    let mut best = max_range;
    let [w, h] = scene.workspace;
    // Walls x = 0, x = w, y = 0, y = h.
    if dir.x > 0.0 {
        best = best.min((w - origin.x) / dir.x);
    } else if dir.x < 0.0 {
        best = best.min(-origin.x / dir.x);
    }
    if dir.y > 0.0 {
        best = best.min((h - origin.y) / dir.y);
    } else if dir.y < 0.0 {
        best = best.min(-origin.y / dir.y);
    }
    for ob in &scene.obstacles {
        if let Some(t) = ray_circle(origin, &dir, &ob.center(), ob.r) {
            best = best.min(t);
        }
    }
    best
}

/// Smallest positive `t` with `|o + t d - c| = r` (unit `d`), tangency included.
fn ray_circle(o: &Point, d: &Vector2<f64>, c: &Point, r: f64) -> Option<f64> {
    let oc = o - c;
    let b = oc.dot(d);
    let cc = oc.norm_squared() - r * r;
    let mut disc = b * b - cc;
    if disc < 0.0 {
        // Grazing rays land a few ulps on either side of zero.
        if disc < -1e-12 * r * r {
            return None;
        }
        disc = 0.0;
    }
    let s = disc.sqrt();
    let t0 = -b - s;
    if t0 > 0.0 {
        return Some(t0);
    }
    let t1 = -b + s;
    (t1 > 0.0).then_some(t1)
}

pub fn simulate_scan(
    scene: &Scene,
    pose: &Pose,
    n_beams: usize,
    max_range: f64,
) -> Result<(RangeMap, PointCloud), PerceptionError> {
    if n_beams < 8 {
        return Err(PerceptionError::TooFewBeams(n_beams));
    }
    let p = pose.position;
    let [w, h] = scene.workspace;
    if !(p.x > 0.0 && p.x < w && p.y > 0.0 && p.y < h) {
        return Err(PerceptionError::PoseOutsideWorkspace { x: p.x, y: p.y });
    }
    if let Some(index) = scene
        .obstacles
        .iter()
        .position(|o| (o.center() - p).norm() < o.r)
    {
        return Err(PerceptionError::PoseInsideObstacle {
            index,
            x: p.x,
            y: p.y,
        });
    }
    let mut ranges = Vec::with_capacity(n_beams);
    let mut cloud = PointCloud::default();
    for i in 0..n_beams {
        let az = beam_azimuth(i, n_beams);
        let t = cast_ray(scene, &p, az, max_range);
        if t < max_range {
            ranges.push(t);
            cloud.points.push(p + Vector2::new(az.cos(), az.sin()) * t);
            cloud.beams.push(i);
        } else {
            ranges.push(max_range);
        }
    }
    Ok((
        RangeMap {
            ranges,
            max_range,
            origin: *pose,
        },
        cloud,
    ))
}

/// Points on the sensing horizon for every beam that saw nothing.
///
/// Treating the horizon as an obstacle keeps free regions inside observed space.
pub fn horizon_points(map: &RangeMap) -> PointCloud {
    let mut cloud = PointCloud::default();
    for (i, &r) in map.ranges.iter().enumerate() {
        if r >= map.max_range {
            let az = map.azimuth(i);
            cloud
                .points
                .push(map.origin.position + Vector2::new(az.cos(), az.sin()) * map.max_range);
            cloud.beams.push(i);
        }
    }
    cloud
}

/// Halfspaces bounding each run of no-return beams by a polygon inscribed in
/// the sensing circle.
///
/// Tangent lines are placed at most `max_step` radians apart (always at both
/// ends of a run), pulled in to `max_range·cos(step/2)` so that the corners
/// between consecutive tangents stay within range.
pub fn horizon_halfspaces(map: &RangeMap, max_step: f64) -> Vec<Halfspace> {
    let n = map.len();
    let open: Vec<bool> = map.ranges.iter().map(|&r| r >= map.max_range).collect();
    if !open.iter().any(|&o| o) {
        return Vec::new();
    }
    let spacing = map.beam_spacing();
    let stride = ((max_step / spacing).floor() as usize).max(1);
    let radius = map.max_range * (0.5 * stride as f64 * spacing).cos();
    let first = (0..n).find(|&i| !open[i]).map_or(0, |i| (i + 1) % n);
    let mut out = Vec::new();
    let mut k = 0usize;
    for s in 0..n {
        let i = (first + s) % n;
        if !open[i] {
            k = 0;
            continue;
        }
        let end = !open[(i + 1) % n];
        if k % stride == 0 || end {
            let az = map.azimuth(i);
            let u = Vector2::new(az.cos(), az.sin());
            out.push(Halfspace {
                normal: u,
                offset: u.dot(&map.origin.position) + radius,
            });
        }
        k += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub start_beam: usize,
    /// Inclusive; may be smaller than `start_beam` when the gap wraps.
    pub end_beam: usize,
    pub angular_width: f64,
    pub near_range: f64,
}

impl Gap {
    pub fn beam_count(&self, n: usize) -> usize {
        (self.end_beam + n - self.start_beam) % n + 1
    }

    pub fn beams(&self, n: usize) -> impl Iterator<Item = usize> {
        let s = self.start_beam;
        (0..self.beam_count(n)).map(move |k| (s + k) % n)
    }

    pub fn is_full_circle(&self) -> bool {
        self.angular_width >= TAU - 1e-9
    }

    /// Angular bisector of the beams spanned by the gap.
    pub fn bisector(&self, n: usize) -> f64 {
        let spacing = TAU / n as f64;
        beam_azimuth(self.start_beam, n) + 0.5 * (self.beam_count(n) - 1) as f64 * spacing
    }
}

/// Minimum gap width policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MinWidth {
    Fixed(f64),
    /// `2·atan(circumradius / near_range)`: the opening must plausibly admit the body.
    Body {
        circumradius: f64,
    },
}

impl MinWidth {
    fn threshold(&self, near_range: f64) -> f64 {
        match *self {
            MinWidth::Fixed(w) => w,
            MinWidth::Body { circumradius } => 2.0 * (circumradius / near_range.max(1e-9)).atan(),
        }
    }
}

/// Gaps with a fixed minimum angular width.
pub fn extract_gaps(map: &RangeMap, depth_jump: f64, min_width: f64) -> Vec<Gap> {
    extract_gaps_with(map, depth_jump, MinWidth::Fixed(min_width))
}

/// Finds angular openings in a range map.
///
/// The scan is cut into segments at depth discontinuities
/// (`|r[i+1] - r[i]| > depth_jump`, circular). A segment that is farther than
/// both of its neighbours across the cuts is an opening. Runs of max-range
/// beams are openings as well, and a scan with no returns at all is a single
/// full-circle gap.
pub fn extract_gaps_with(map: &RangeMap, depth_jump: f64, min_width: MinWidth) -> Vec<Gap> {
    let n = map.len();
    let r = &map.ranges;
    let spacing = map.beam_spacing();
    let cut: Vec<bool> = (0..n)
        .map(|i| (r[(i + 1) % n] - r[i]).abs() > depth_jump)
        .collect();

    let mut raw: Vec<(usize, usize, f64)> = Vec::new();
    if (0..n).all(|i| map.is_max(i)) {
        raw.push((0, n - 1, map.max_range));
    } else if let Some(first_cut) = cut.iter().position(|&c| c) {
        let mut s = (first_cut + 1) % n;
        let mut covered = 0;
        while covered < n {
            let mut e = s;
            let mut len = 1;
            while !cut[e] {
                e = (e + 1) % n;
                len += 1;
            }
            let before = (s + n - 1) % n;
            let after = (e + 1) % n;
            let peak = r[s] > r[before] && r[e] > r[after];
            if peak {
                raw.push((s, e, r[before].min(r[after])));
            } else {
                raw.extend(max_runs(map, s, len));
            }
            covered += len;
            s = after;
        }
    } else {
        raw.extend(max_runs(map, 0, n));
    }

    let mut gaps: Vec<Gap> = raw
        .into_iter()
        .map(|(s, e, near)| {
            let count = (e + n - s) % n + 1;
            Gap {
                start_beam: s,
                end_beam: e,
                angular_width: count as f64 * spacing,
                near_range: near,
            }
        })
        .filter(|g| g.angular_width >= min_width.threshold(g.near_range))
        .collect();
    gaps.sort_by_key(|g| g.start_beam);
    gaps
}

/// Maximal runs of max-range beams inside the circular window `[s, s+len)`.
fn max_runs(map: &RangeMap, s: usize, len: usize) -> Vec<(usize, usize, f64)> {
    let n = map.len();
    let mut out = Vec::new();
    let mut k = 0;
    while k < len {
        let i = (s + k) % n;
        if !map.is_max(i) {
            k += 1;
            continue;
        }
        let start = k;
        while k < len && map.is_max((s + k) % n) {
            k += 1;
        }
        // A run touching both ends of a full-circle window wraps; handled by
        // the caller only producing full windows when no cut exists.
        let a = (s + start) % n;
        let b = (s + k - 1) % n;
        let before = (a + n - 1) % n;
        let after = (b + 1) % n;
        out.push((a, b, map.ranges[before].min(map.ranges[after])));
    }
    if len == n && out.len() >= 2 {
        // Merge a run that wraps across the window start.
        let first = out[0];
        let last = *out.last().unwrap();
        if first.0 == s && (last.1 + 1) % n == s {
            let merged = (
                last.0,
                first.1,
                map.ranges[(last.0 + n - 1) % n].min(map.ranges[(first.1 + 1) % n]),
            );
            out.pop();
            out[0] = merged;
        }
    }
    out
}

/// One unit direction per gap along its bisector, widest first, at most `max_directions`.
/// A full-circle opening maps to `fallback` (the goal direction).
pub fn gaps_to_directions(
    gaps: &[Gap],
    map: &RangeMap,
    max_directions: usize,
    fallback: UnitDirection,
) -> Vec<UnitDirection> {
    let n = map.len();
    let mut order: Vec<&Gap> = gaps.iter().collect();
    order.sort_by(|a, b| {
        b.angular_width
            .total_cmp(&a.angular_width)
            .then(a.start_beam.cmp(&b.start_beam))
    });
    order
        .into_iter()
        .take(max_directions)
        .map(|g| {
            if g.is_full_circle() {
                fallback
            } else {
                UnitDirection::from_angle(g.bisector(n))
            }
        })
        .collect()
}
