//! One planning episode with an independent collision oracle.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::scene::Scene;
use crate::geometry::{
    halfspace_violation, polygon_circle_penetration, ConvexRegion, Halfspace, Point, Pose,
    UnitDirection,
};
use crate::graph::{EdgeStatus, FrontierEdge, GoalCheck, GraphNode, NavGraph};
use crate::perception::{
    extract_gaps_with, gaps_to_directions, horizon_halfspaces, simulate_scan, MinWidth,
    DEFAULT_BEAMS, DEFAULT_DEPTH_JUMP, DEFAULT_MAX_DIRECTIONS, DEFAULT_MAX_RANGE,
};
use crate::region::{generate_region_bounded, RegionGenConfig};
use crate::trajectory::{
    generate_safe_to, init_trajectory, select_target_pose_with_clearance, PoseTrajectory,
    RefineConfig, SafetyCertificate, TargetPose, Verdict, DEFAULT_DEGREE, DEFAULT_YAW_SAMPLES,
};

pub const LOG_VERSION: u32 = 1;
const WALL_INSET: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub beams: usize,
    pub max_range: f64,
    pub depth_jump: f64,
    pub max_directions: usize,
    /// Adds the straight-to-goal direction when no gap direction is within
    /// `DUPLICATE_HEADING` of it.
    pub goal_direction: bool,
    /// Largest angle between horizon tangents over no-return beams.
    pub horizon_step: f64,
    /// Scales the body circumradius in the minimum gap width.
    pub gap_radius_scale: f64,
    pub duplicate_distance: f64,
    pub duplicate_heading: f64,
    /// Targets with less progress along their direction are not added.
    pub min_progress: f64,
    pub dedup_edges: bool,
    pub travel_weight: f64,
    pub region: RegionGenConfig,
    pub refine: RefineConfig,
    pub degree: usize,
    pub n_yaw: usize,
    pub step_budget: usize,
    pub goal_tolerance: f64,
    pub oracle_dt: f64,
    pub no_direction_aware: bool,
    pub no_continuous_safety: bool,
    pub static_samples: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            beams: DEFAULT_BEAMS,
            max_range: DEFAULT_MAX_RANGE,
            depth_jump: DEFAULT_DEPTH_JUMP,
            max_directions: DEFAULT_MAX_DIRECTIONS,
            goal_direction: true,
            horizon_step: 10f64.to_radians(),
            gap_radius_scale: 0.0,
            duplicate_distance: crate::graph::DUPLICATE_DISTANCE,
            duplicate_heading: crate::graph::DUPLICATE_HEADING,
            min_progress: 0.0,
            dedup_edges: true,
            travel_weight: 1.0,
            region: RegionGenConfig::default(),
            refine: RefineConfig::default(),
            degree: DEFAULT_DEGREE,
            n_yaw: DEFAULT_YAW_SAMPLES,
            step_budget: 200,
            goal_tolerance: 0.2,
            oracle_dt: 1e-3,
            no_direction_aware: false,
            no_continuous_safety: false,
            static_samples: 50,
        }
    }
}

impl PlannerConfig {
    pub fn variant_name(&self) -> &'static str {
        match (self.no_direction_aware, self.no_continuous_safety) {
            (false, false) => "full",
            (true, false) => "no_direction_aware",
            (false, true) => "no_continuous_safety",
            (true, true) => "no_direction_aware+no_continuous_safety",
        }
    }

    fn region_config(&self) -> RegionGenConfig {
        RegionGenConfig {
            direction_aware: !self.no_direction_aware,
            sensor_range: self.max_range,
            ..self.region
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GoalReached,
    FrontierExhausted,
    StepBudget,
    ScanFailed,
}

/// Summed wall-clock time per module, with call counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModuleTimings {
    pub region_ms: f64,
    pub region_calls: usize,
    pub target_ms: f64,
    pub target_calls: usize,
    pub traj_ms: f64,
    pub traj_calls: usize,
}

impl ModuleTimings {
    pub fn add(&mut self, o: &ModuleTimings) {
        self.region_ms += o.region_ms;
        self.region_calls += o.region_calls;
        self.target_ms += o.target_ms;
        self.target_calls += o.target_calls;
        self.traj_ms += o.traj_ms;
        self.traj_calls += o.traj_calls;
    }

    pub fn mean_region_ms(&self) -> f64 {
        self.region_ms / self.region_calls.max(1) as f64
    }

    pub fn mean_target_ms(&self) -> f64 {
        self.target_ms / self.target_calls.max(1) as f64
    }

    pub fn mean_traj_ms(&self) -> f64 {
        self.traj_ms / self.traj_calls.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanLog {
    pub node: usize,
    pub pose: Pose,
    pub points: Vec<Point>,
    pub horizon: Vec<Halfspace>,
    pub directions: Vec<UnitDirection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub collided: bool,
    pub max_penetration: f64,
    /// Parameter of the first colliding sample.
    pub first_hit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutedLeg {
    pub step: usize,
    pub edge: usize,
    pub reversed: bool,
    pub trajectory: PoseTrajectory,
    pub length: f64,
    pub oracle: OracleVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub edge: usize,
    pub status: EdgeStatus,
    pub refine_iterations: Option<usize>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub version: u32,
    pub variant: String,
    pub scene: Scene,
    pub scans: Vec<ScanLog>,
    pub steps: Vec<StepLog>,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<FrontierEdge>,
    pub executed: Vec<ExecutedLeg>,
    pub result: EpisodeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub completed: bool,
    pub collided: bool,
    pub termination: Termination,
    pub path_length: f64,
    pub straight_line: f64,
    pub steps: usize,
    pub final_pose: Pose,
    pub timings: ModuleTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub completed: bool,
    pub collided: bool,
    pub termination: Termination,
    pub path_length: f64,
    pub straight_line: f64,
    pub steps: usize,
    pub timings: ModuleTimings,
    pub log: EpisodeLog,
}

impl EpisodeResult {
    pub fn length_scale(&self) -> f64 {
        self.path_length / self.straight_line
    }
}

/// Samples `traj` at parameter step `dt` and measures the deepest overlap of
/// the body with any disc or with the outside of the workspace.
pub fn oracle_check(scene: &Scene, traj: &PoseTrajectory, dt: f64) -> OracleVerdict {
    let n = (1.0 / dt).round().max(1.0) as usize;
    let reach = scene.robot.circumradius();
    let [w, h] = scene.workspace;
    let mut worst = 0.0f64;
    let mut first_hit = None;
    for i in 0..=n {
        let t = i as f64 / n as f64;
        let pose = traj.pose_at(t);
        let mut depth = 0.0f64;
        for o in &scene.obstacles {
            if (o.center() - pose.position).norm() <= o.r + reach {
                depth = depth.max(polygon_circle_penetration(
                    &scene.robot,
                    &pose,
                    &o.center(),
                    o.r,
                ));
            }
        }
        for v in scene.robot.world_vertices(&pose) {
            depth = depth.max(-v.x).max(v.x - w).max(-v.y).max(v.y - h);
        }
        if depth > 0.0 && first_hit.is_none() {
            first_hit = Some(t);
        }
        worst = worst.max(depth);
    }
    OracleVerdict {
        collided: worst > 0.0,
        max_penetration: worst,
        first_hit,
    }
}

/// Accepts a straight initialization when `samples` static checks pass.
fn sampled_check(
    region: &ConvexRegion,
    scene: &Scene,
    start: &Pose,
    target: &TargetPose,
    cfg: &PlannerConfig,
) -> Option<(PoseTrajectory, SafetyCertificate)> {
    let traj = init_trajectory(start, &target.pose, cfg.degree);
    let n = cfg.static_samples.max(2);
    let mut worst = (f64::NEG_INFINITY, 0.0);
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let v = halfspace_violation(region, &scene.robot, &traj.pose_at(t)).worst;
        if v > worst.0 {
            worst = (v, t);
        }
    }
    (worst.0 <= 0.0).then(|| {
        let cert = SafetyCertificate {
            verdict: Verdict::Safe,
            margin: worst.0,
            worst_time: worst.1,
            worst_value: worst.0,
            violated_hyperplanes: Vec::new(),
            violated_values: Vec::new(),
            active_vertices: Vec::new(),
            intervals_examined: n,
        };
        (traj, cert)
    })
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

struct Planner<'a> {
    scene: &'a Scene,
    cfg: &'a PlannerConfig,
    graph: NavGraph,
    timings: ModuleTimings,
    scans: Vec<ScanLog>,
}

impl Planner<'_> {
    /// Scans at `node`, builds one region per direction and adds edges.
    fn expand(&mut self, node: usize) -> bool {
        let cfg = self.cfg;
        let body = &self.scene.robot;
        let pose = self.graph.nodes[node].pose;
        let Ok((map, cloud)) = simulate_scan(self.scene, &pose, cfg.beams, cfg.max_range) else {
            return false;
        };
        let horizon = horizon_halfspaces(&map, cfg.horizon_step);
        // Wall returns sit on these and are pruned without a QP each.
        let mut bounds = self.scene.workspace_bounds(WALL_INSET);
        bounds.extend_from_slice(&horizon);
        let gaps = extract_gaps_with(
            &map,
            cfg.depth_jump,
            MinWidth::Body {
                circumradius: cfg.gap_radius_scale * body.circumradius(),
            },
        );
        let to_goal = UnitDirection::new(self.scene.goal - pose.position)
            .unwrap_or_else(|_| UnitDirection::x());
        let mut dirs = gaps_to_directions(&gaps, &map, cfg.max_directions, to_goal);
        if cfg.goal_direction
            && !dirs
                .iter()
                .any(|d| d.vector().dot(&to_goal.vector()) > crate::graph::DUPLICATE_HEADING.cos())
        {
            dirs.insert(0, to_goal);
        }
        let rcfg = cfg.region_config();
        let mut kept_dirs = Vec::new();
        let mut regions = Vec::new();
        let mut targets = Vec::new();
        for d in &dirs {
            let t0 = Instant::now();
            let region = generate_region_bounded(
                &cloud.points,
                &bounds,
                &pose.position,
                pose.heading,
                body,
                d,
                &rcfg,
            );
            self.timings.region_ms += ms(t0);
            self.timings.region_calls += 1;
            let Ok((region, _)) = region else { continue };
            let region = region.normalized();
            let t0 = Instant::now();
            let target = select_target_pose_with_clearance(
                &region,
                body,
                d,
                &pose,
                cfg.n_yaw,
                cfg.refine.target_clearance,
            );
            self.timings.target_ms += ms(t0);
            self.timings.target_calls += 1;
            let Ok(target) = target else { continue };
            if target.progress < cfg.min_progress {
                continue;
            }
            kept_dirs.push(*d);
            regions.push(region);
            targets.push(target);
        }
        if let Some(r) = regions.first() {
            if halfspace_violation(r, body, &pose).worst <= 0.0 {
                self.graph.nodes[node].region = r.clone();
            }
        }
        self.graph.nodes[node].scan = Some(self.scans.len());
        self.scans.push(ScanLog {
            node,
            pose,
            points: cloud.points,
            horizon: horizon.clone(),
            directions: dirs,
        });
        let check = GoalCheck {
            body,
            n_yaw: cfg.n_yaw,
            clearance: cfg.refine.target_clearance,
        };
        self.graph
            .expand_node(node, &kept_dirs, &regions, &targets, Some(check));
        true
    }
}

pub fn run_episode(scene: &Scene, cfg: &PlannerConfig) -> EpisodeResult {
    let body = &scene.robot;
    let [w, h] = scene.workspace;
    let root_region = ConvexRegion::axis_box(0.0, w, 0.0, h).expect("workspace box");
    let mut p = Planner {
        scene,
        cfg,
        graph: NavGraph::new(scene.start, root_region, scene.goal, cfg.goal_tolerance),
        timings: ModuleTimings::default(),
        scans: Vec::new(),
    };
    p.graph.duplicate_distance = cfg.duplicate_distance;
    p.graph.duplicate_heading = cfg.duplicate_heading;
    p.graph.dedup_edges = cfg.dedup_edges;
    p.graph.travel_weight = cfg.travel_weight;
    let mut pose = scene.start;
    let mut steps = Vec::new();
    let mut executed = Vec::new();
    let mut path_length = 0.0;
    let mut collided = false;
    let mut termination = if p.expand(0) {
        None
    } else {
        Some(Termination::ScanFailed)
    };
    let mut step = 0;
    while termination.is_none() {
        if p.graph.goal_reached(&pose.position) {
            termination = Some(Termination::GoalReached);
            break;
        }
        if step >= cfg.step_budget {
            termination = Some(Termination::StepBudget);
            break;
        }
        let Some(e) = p.graph.select_frontier_edge() else {
            termination = Some(Termination::FrontierExhausted);
            break;
        };
        step += 1;
        let edge = &p.graph.edges[e];
        let source = p.graph.nodes[edge.source].pose;
        let target = TargetPose {
            pose: edge.target,
            progress: edge.progress,
        };
        let region = edge.region.clone();
        let t0 = Instant::now();
        let (result, refine_iterations, failure) = if cfg.no_continuous_safety {
            let r = sampled_check(&region, scene, &source, &target, cfg);
            let fail = r.is_none().then(|| "sampled check failed".to_string());
            (r, None, fail)
        } else {
            match generate_safe_to(&region, body, &source, target, &cfg.refine, cfg.degree) {
                Ok(s) => (
                    Some((s.trajectory, s.certificate)),
                    Some(s.refine_iterations),
                    None,
                ),
                Err(err) => (None, None, Some(err.to_string())),
            }
        };
        p.timings.traj_ms += ms(t0);
        p.timings.traj_calls += 1;
        let tr = p.graph.commit_or_invalidate(e, result, body, |_| None);
        steps.push(StepLog {
            step,
            edge: e,
            status: tr.status,
            refine_iterations,
            failure,
        });
        let Some(node) = tr.new_node else { continue };
        for leg in tr.motion {
            let oracle = oracle_check(scene, &leg.trajectory, cfg.oracle_dt);
            collided |= oracle.collided;
            let length = leg.trajectory.path_length(1000);
            path_length += length;
            executed.push(ExecutedLeg {
                step,
                edge: leg.edge,
                reversed: leg.reversed,
                trajectory: leg.trajectory,
                length,
                oracle,
            });
        }
        pose = p.graph.nodes[node].pose;
        if !p.expand(node) {
            termination = Some(Termination::ScanFailed);
        }
    }
    let termination = termination.expect("loop exits with a reason");
    let completed = termination == Termination::GoalReached;
    let straight_line = (scene.goal - scene.start.position).norm();
    let summary = EpisodeSummary {
        completed,
        collided,
        termination,
        path_length,
        straight_line,
        steps: step,
        final_pose: pose,
        timings: p.timings,
    };
    let log = EpisodeLog {
        version: LOG_VERSION,
        variant: cfg.variant_name().to_string(),
        scene: scene.clone(),
        scans: p.scans,
        steps,
        nodes: p.graph.nodes,
        edges: p.graph.edges,
        executed,
        result: summary,
    };
    EpisodeResult {
        completed,
        collided,
        termination,
        path_length,
        straight_line,
        steps: step,
        timings: p.timings,
        log,
    }
}
