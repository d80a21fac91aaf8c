//! Random cylinder scenes and their JSON form.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ConvexBody, ConvexRegion, Halfspace, Point, Pose};

pub const WORKSPACE: [f64; 2] = [5.0, 5.0];
pub const OBSTACLE_RADIUS: f64 = 0.3;
pub const START: [f64; 2] = [0.5, 0.5];
pub const GOAL: [f64; 2] = [4.5, 4.5];
pub const GRID_CELL: f64 = 0.05;
const MAX_REDRAWS: u64 = 1000;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("no feasible scene after {0} redraws")]
    SceneGenerationExhausted(u64),
    #[error("obstacle density must be positive, got {0}")]
    BadDensity(f64),
    #[error("invalid scene file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl Obstacle {
    pub fn center(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Workspace `[0, w] × [0, h]` with disc obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub workspace: [f64; 2],
    pub obstacles: Vec<Obstacle>,
    pub start: Pose,
    pub goal: Point,
    pub robot: ConvexBody,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct XyTheta {
    x: f64,
    y: f64,
    theta: f64,
}

#[derive(Serialize, Deserialize)]
struct Xy {
    x: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
struct RobotJson {
    vertices: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct SceneJson {
    workspace: [f64; 2],
    obstacles: Vec<Obstacle>,
    start: XyTheta,
    goal: Xy,
    robot: RobotJson,
    seed: u64,
}

impl Serialize for Scene {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SceneJson {
            workspace: self.workspace,
            obstacles: self.obstacles.clone(),
            start: XyTheta {
                x: self.start.position.x,
                y: self.start.position.y,
                theta: self.start.heading,
            },
            goal: Xy {
                x: self.goal.x,
                y: self.goal.y,
            },
            robot: RobotJson {
                vertices: self.robot.vertices().iter().map(|v| [v.x, v.y]).collect(),
            },
            seed: self.seed,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Scene {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = SceneJson::deserialize(d)?;
        let robot = ConvexBody::new(
            j.robot
                .vertices
                .iter()
                .map(|v| Point::new(v[0], v[1]))
                .collect(),
        )
        .map_err(serde::de::Error::custom)?;
        Ok(Scene {
            workspace: j.workspace,
            obstacles: j.obstacles,
            start: Pose::new(j.start.x, j.start.y, j.start.theta),
            goal: Point::new(j.goal.x, j.goal.y),
            robot,
            seed: j.seed,
        })
    }
}

impl Scene {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SceneError> {
        Ok(serde_json::from_str(s)?)
    }

    /// Workspace box as halfspaces, shrunk by `inset` on every side.
    pub fn workspace_bounds(&self, inset: f64) -> Vec<Halfspace> {
        let [w, h] = self.workspace;
        ConvexRegion::axis_box(inset, w - inset, inset, h - inset)
            .expect("workspace box is valid")
            .halfspaces()
            .to_vec()
    }

    pub fn density(&self) -> f64 {
        self.obstacles.len() as f64 / (self.workspace[0] * self.workspace[1])
    }

    /// Obstacle layout mapped by one of the four symmetries of the square
    /// workspace that keep the start-goal diagonal in place: identity,
    /// reflection about `y = x`, half turn, reflection about the other
    /// diagonal. Start, goal and robot are unchanged, so clearance and grid
    /// connectivity carry over.
    pub fn symmetric_variant(&self, k: u32) -> Scene {
        let [w, h] = self.workspace;
        let mut out = self.clone();
        for o in &mut out.obstacles {
            let (x, y) = (o.x, o.y);
            (o.x, o.y) = match k % 4 {
                0 => (x, y),
                1 => (y * w / h, x * h / w),
                2 => (w - x, h - y),
                _ => (w - y * w / h, h - x * h / w),
            };
        }
        out
    }

    /// 4-connected reachability on a `GRID_CELL` occupancy grid where discs
    /// and walls are inflated by `inflation`.
    pub fn grid_connected(&self, inflation: f64) -> bool {
        let [w, h] = self.workspace;
        let nx = (w / GRID_CELL).round() as usize;
        let ny = (h / GRID_CELL).round() as usize;
        let center = |i: usize, j: usize| {
            Point::new((i as f64 + 0.5) * GRID_CELL, (j as f64 + 0.5) * GRID_CELL)
        };
        let free = |i: usize, j: usize| {
            let p = center(i, j);
            p.x >= inflation
                && p.x <= w - inflation
                && p.y >= inflation
                && p.y <= h - inflation
                && self
                    .obstacles
                    .iter()
                    .all(|o| (p - o.center()).norm() > o.r + inflation)
        };
        let cell = |p: Point| {
            (
                ((p.x / GRID_CELL) as usize).min(nx - 1),
                ((p.y / GRID_CELL) as usize).min(ny - 1),
            )
        };
        let s = cell(self.start.position);
        let g = cell(self.goal);
        if !free(s.0, s.1) || !free(g.0, g.1) {
            return false;
        }
        let mut seen = vec![false; nx * ny];
        let mut queue = VecDeque::from([s]);
        seen[s.1 * nx + s.0] = true;
        while let Some((i, j)) = queue.pop_front() {
            if (i, j) == g {
                return true;
            }
            let mut push = |a: usize, b: usize| {
                if !seen[b * nx + a] && free(a, b) {
                    seen[b * nx + a] = true;
                    queue.push_back((a, b));
                }
            };
            if i > 0 {
                push(i - 1, j);
            }
            if i + 1 < nx {
                push(i + 1, j);
            }
            if j > 0 {
                push(i, j - 1);
            }
            if j + 1 < ny {
                push(i, j + 1);
            }
        }
        false
    }
}

/// Default footprint: 0.6 m × 0.4 m rectangle.
pub fn default_robot() -> ConvexBody {
    ConvexBody::rectangle(0.6, 0.4).expect("valid rectangle")
}

fn attempt_seed(seed: u64, attempt: u64) -> u64 {
    // splitmix64 step keeps successive redraws decorrelated.
    let mut z = seed
        .wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generate_scene(density: f64, seed: u64) -> Result<Scene, SceneError> {
    generate_scene_with(density, seed, default_robot())
}

pub fn generate_scene_with(
    density: f64,
    seed: u64,
    robot: ConvexBody,
) -> Result<Scene, SceneError> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(SceneError::BadDensity(density));
    }
    let [w, h] = WORKSPACE;
    let count = (density * w * h).round() as usize;
    let start = Point::new(START[0], START[1]);
    let goal = Point::new(GOAL[0], GOAL[1]);
    let clearance = robot.circumradius() + 0.1;
    let heading = (goal.y - start.y).atan2(goal.x - start.x);
    for attempt in 0..MAX_REDRAWS {
        let mut rng = ChaCha8Rng::seed_from_u64(attempt_seed(seed, attempt));
        let mut obstacles = Vec::with_capacity(count);
        while obstacles.len() < count {
            let c = Point::new(rng.random_range(0.0..w), rng.random_range(0.0..h));
            let ok = (c - start).norm() >= OBSTACLE_RADIUS + clearance
                && (c - goal).norm() >= OBSTACLE_RADIUS + clearance;
            if ok {
                obstacles.push(Obstacle {
                    x: c.x,
                    y: c.y,
                    r: OBSTACLE_RADIUS,
                });
            }
        }
        let scene = Scene {
            workspace: WORKSPACE,
            obstacles,
            start: Pose {
                position: start,
                heading,
            },
            goal,
            robot: robot.clone(),
            seed,
        };
        if scene.grid_connected(scene.robot.inradius()) {
            return Ok(scene);
        }
    }
    Err(SceneError::SceneGenerationExhausted(MAX_REDRAWS))
}
