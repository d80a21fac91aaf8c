//! Property suites shared by the topic tests and the acceptance gate.
//!
//! Each suite returns a summary; the caller decides the instance count.

use freenav::geometry::{halfspace_violation, ConvexBody, ConvexRegion, Pose, UnitDirection};
use freenav::harness::scene::{Obstacle, Scene, WORKSPACE};
use freenav::perception::{horizon_halfspaces, simulate_scan};
use freenav::region::{generate_region_bounded, RegionError, RegionGenConfig};
use freenav::solvers::kkt::{check_lp, check_qp};
use freenav::solvers::{solve_lp, solve_qp, SolveStatus};
use freenav::trajectory::{
    verify_continuous, verify_continuous_with, BezierCurve, PoseTrajectory, Verdict,
    VerifyConfig,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::*;

#[derive(Debug, Default)]
pub struct SolverSuite {
    pub qp_checked: usize,
    pub lp_checked: usize,
    pub worst_qp_vs_enum: f64,
    /// Solver objective minus grid objective; must not exceed the tolerance.
    pub worst_qp_above_grid: f64,
    pub worst_lp_gap: f64,
    pub kkt_failures: usize,
    pub non_optimal: usize,
}

impl SolverSuite {
    pub fn passes(&self) -> bool {
        self.worst_qp_vs_enum <= 1e-6
            && self.worst_qp_above_grid <= 1e-4
            && self.worst_lp_gap <= 1e-7
            && self.kkt_failures == 0
            && self.non_optimal == 0
    }
}

/// Random QPs against the grid and active-set enumeration oracles, random LPs
/// against vertex enumeration; every optimum goes through the KKT checker.
pub fn solver_suite(n_qp: usize, n_lp: usize, seed: u64) -> SolverSuite {
    let mut r = rng(seed);
    let mut s = SolverSuite::default();
    for _ in 0..n_qp {
        let qp = random_qp(&mut r);
        let rep = solve_qp(&qp).expect("valid qp");
        if rep.status != SolveStatus::Optimal {
            s.non_optimal += 1;
            continue;
        }
        if !check_qp(&qp, &rep).passes() {
            s.kkt_failures += 1;
        }
        let exact = enumerate_qp_oracle(&qp);
        s.worst_qp_vs_enum = s.worst_qp_vs_enum.max((rep.objective - exact).abs());
        let grid = grid_qp_oracle(&qp, 2);
        s.worst_qp_above_grid = s.worst_qp_above_grid.max(rep.objective - grid);
        s.qp_checked += 1;
    }
    for _ in 0..n_lp {
        let lp = random_lp(&mut r);
        let rep = solve_lp(&lp).expect("valid lp");
        if rep.status != SolveStatus::Optimal {
            s.non_optimal += 1;
            continue;
        }
        if !check_lp(&lp, &rep).passes() {
            s.kkt_failures += 1;
        }
        let oracle = vertex_lp_oracle(&lp);
        let value = lp.cost.dot(&nalgebra::DVector::from_column_slice(&rep.solution));
        s.worst_lp_gap = s.worst_lp_gap.max((value - oracle).abs());
        s.lp_checked += 1;
    }
    s
}

pub fn random_trajectory(r: &mut ChaCha8Rng) -> PoseTrajectory {
    let k = r.random_range(3..=6);
    let spread = r.random_range(0.2..1.6);
    let pos: Vec<[f64; 2]> = (0..=k)
        .map(|_| [r.random_range(-spread..spread), r.random_range(-spread..spread)])
        .collect();
    let yaw0 = r.random_range(-3.0..3.0);
    let turn = r.random_range(0.0..3.0);
    let yaw: Vec<[f64; 1]> = (0..=k)
        .map(|_| [yaw0 + r.random_range(-turn..=turn)])
        .collect();
    PoseTrajectory::new(
        BezierCurve::new(pos).unwrap(),
        BezierCurve::new(yaw).unwrap(),
    )
    .unwrap()
}

#[derive(Debug, Default)]
pub struct VerifierSuite {
    pub instances: usize,
    pub safe: usize,
    pub violated: usize,
    pub inconclusive: usize,
    /// Safe verdicts where dense sampling found g > 0.
    pub contradicted: usize,
    /// Violated verdicts whose reported value was not a real violation.
    pub false_violations: usize,
    pub bounds_checked: usize,
    /// Largest `sampled g - bound` over all recorded intervals.
    pub worst_bound_excess: f64,
}

impl VerifierSuite {
    pub fn passes(&self) -> bool {
        self.contradicted == 0 && self.false_violations == 0 && self.worst_bound_excess <= 1e-9
    }
}

/// Random trajectory/region/body triples. Safe verdicts are checked against
/// dense sampling at `dt`; every recorded interval bound is checked at nine
/// interior points and both ends.
pub fn verifier_suite(n: usize, dt: f64, seed: u64) -> VerifierSuite {
    let mut r = rng(seed);
    let mut s = VerifierSuite {
        worst_bound_excess: f64::NEG_INFINITY,
        ..Default::default()
    };
    let cfg = VerifyConfig {
        record_bounds: true,
        ..Default::default()
    };
    for _ in 0..n {
        let region = random_region(&mut r);
        let body = random_body(&mut r);
        let traj = random_trajectory(&mut r);
        let (cert, bounds) = verify_continuous_with(&traj, &region, &body, &cfg);
        s.instances += 1;
        let g = |t: f64| direct_violation(&traj, &region, &body, t);
        match cert.verdict {
            Verdict::Safe => {
                s.safe += 1;
                if dense_max(g, dt).0 > 0.0 {
                    s.contradicted += 1;
                }
            }
            Verdict::Violated => {
                s.violated += 1;
                if g(cert.worst_time) <= 0.0 {
                    s.false_violations += 1;
                }
            }
            Verdict::Inconclusive => s.inconclusive += 1,
        }
        for b in &bounds {
            for i in 0..=10 {
                let t = b.t_lo + (b.t_hi - b.t_lo) * i as f64 / 10.0;
                s.worst_bound_excess = s.worst_bound_excess.max(g(t) - b.bound);
            }
            s.bounds_checked += 1;
        }
    }
    s
}

#[derive(Debug, Default)]
pub struct RegionSuite {
    pub instances: usize,
    pub regions: usize,
    pub errors: usize,
    pub unseparated: usize,
    pub uncontained: usize,
    pub over_budget: usize,
    pub bias_holds: bool,
    pub extent_biased: f64,
    pub extent_identity: f64,
}

impl RegionSuite {
    pub fn passes(&self) -> bool {
        self.regions > 0
            && self.unseparated == 0
            && self.uncontained == 0
            && self.over_budget == 0
            && self.bias_holds
    }
}

pub fn forward_extent(region: &ConvexRegion, e: &UnitDirection) -> f64 {
    region
        .polygon()
        .iter()
        .map(|p| e.vector().dot(p))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The symmetric two-point cloud, once with the default bias and once with
/// the identity weight.
pub fn bias_extents() -> (f64, f64) {
    let pts = [Point::new(2.0, 0.9), Point::new(2.0, -0.9)];
    let body = ConvexBody::rectangle(0.6, 0.4).unwrap();
    let e = UnitDirection::x();
    let run = |lambda: f64| {
        let cfg = RegionGenConfig {
            lambda,
            ..Default::default()
        };
        let (region, _) = freenav::region::generate_region(
            &pts,
            &Point::new(0.0, 0.0),
            0.0,
            &body,
            &e,
            &cfg,
        )
        .unwrap();
        forward_extent(&region, &e)
    };
    (run(0.1), run(1.0))
}

fn random_free_pose(r: &mut ChaCha8Rng, scene: &Scene) -> Pose {
    let reach = scene.robot.circumradius();
    loop {
        let p = Point::new(
            r.random_range(reach + 0.05..WORKSPACE[0] - reach - 0.05),
            r.random_range(reach + 0.05..WORKSPACE[1] - reach - 0.05),
        );
        if scene
            .obstacles
            .iter()
            .all(|o| (o.center() - p).norm() > o.r + reach + 0.05)
        {
            return Pose {
                position: p,
                heading: r.random_range(-3.14..3.14),
            };
        }
    }
}

/// Random clutter, a free pose, a scan, then one region per instance with a
/// random direction and random bias mode. Wall and horizon bounds are passed
/// as in the planner.
pub fn region_suite(n: usize, seed: u64) -> RegionSuite {
    let mut r = rng(seed);
    let mut s = RegionSuite::default();
    for _ in 0..n {
        let count = r.random_range(0..=30);
        let obstacles = (0..count)
            .map(|_| Obstacle {
                x: r.random_range(0.0..WORKSPACE[0]),
                y: r.random_range(0.0..WORKSPACE[1]),
                r: 0.3,
            })
            .collect();
        let mut scene = Scene {
            workspace: WORKSPACE,
            obstacles,
            start: Pose::new(0.5, 0.5, 0.0),
            goal: Point::new(4.5, 4.5),
            robot: ConvexBody::rectangle(0.6, 0.4).unwrap(),
            seed: 0,
        };
        let pose = random_free_pose(&mut r, &scene);
        scene.start = pose;
        let (map, cloud) = simulate_scan(&scene, &pose, 360, 5.0).unwrap();
        let mut bounds = scene.workspace_bounds(1e-9);
        bounds.extend(horizon_halfspaces(&map, 10f64.to_radians()));
        let e = UnitDirection::from_angle(r.random_range(-3.14..3.14));
        let cfg = RegionGenConfig {
            direction_aware: r.random_bool(0.5),
            ..Default::default()
        };
        s.instances += 1;
        let (region, trace) = match generate_region_bounded(
            &cloud.points,
            &bounds,
            &pose.position,
            pose.heading,
            &scene.robot,
            &e,
            &cfg,
        ) {
            Ok(v) => v,
            Err(RegionError::HyperplaneBudgetExceeded(_)) => {
                s.over_budget += 1;
                continue;
            }
            Err(_) => {
                s.errors += 1;
                continue;
            }
        };
        s.regions += 1;
        if trace.iterations.len() > cfg.max_hyperplanes {
            s.over_budget += 1;
        }
        for o in &cloud.points {
            let separated = region
                .halfspaces()
                .iter()
                .any(|h| h.eval(o) >= -1e-9 * h.norm());
            if !separated {
                s.unseparated += 1;
            }
        }
        if halfspace_violation(&region, &scene.robot, &pose).worst > 0.0 {
            s.uncontained += 1;
        }
    }
    let (biased, identity) = bias_extents();
    s.extent_biased = biased;
    s.extent_identity = identity;
    s.bias_holds = biased >= identity;
    s
}

/// Point body, region `x <= 0`, and an x-profile of degree four that is
/// negative at `t = 0, 0.5, 1` and positive around both quarter points, with
/// the right hump higher.
pub fn two_hump_instance() -> (PoseTrajectory, ConvexRegion, ConvexBody) {
    // f(t) = s - 4.5 s^2 + 0.01 t - 0.015 with s = t(1 - t), in power basis.
    let a = [-0.015, 1.01, -5.5, 9.0, -4.5];
    let k = 4;
    let binom = |n: usize, j: usize| {
        (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    };
    let bern: Vec<[f64; 2]> = (0..=k)
        .map(|i| {
            let x = (0..=i).map(|j| binom(i, j) / binom(k, j) * a[j]).sum::<f64>();
            [x, 0.0]
        })
        .collect();
    let traj = PoseTrajectory::new(
        BezierCurve::new(bern).unwrap(),
        BezierCurve::new(vec![[0.0]; k + 1]).unwrap(),
    )
    .unwrap();
    let region = ConvexRegion::axis_box(-10.0, 0.0, -10.0, 10.0).unwrap();
    let body = ConvexBody::square(1e-4).unwrap();
    (traj, region, body)
}

#[derive(Debug)]
pub struct TwoHump {
    pub samples_pass: bool,
    pub verdict: Verdict,
    pub worst_time: f64,
    pub worst_value: f64,
    pub dense_time: f64,
    pub dense_value: f64,
}

impl TwoHump {
    pub fn passes(&self) -> bool {
        self.samples_pass
            && self.verdict == Verdict::Violated
            && self.worst_value > 0.0
            && (self.worst_time - self.dense_time).abs() <= 2e-3
            && (self.worst_value - self.dense_value).abs() <= 1e-5
    }
}

pub fn two_hump() -> TwoHump {
    let (traj, region, body) = two_hump_instance();
    let g = |t: f64| direct_violation(&traj, &region, &body, t);
    let samples_pass = [0.0, 0.5, 1.0].iter().all(|&t| g(t) <= 0.0);
    let cert = verify_continuous(&traj, &region, &body, 1e-5);
    let (dense_value, dense_time) = dense_max(g, 1e-5);
    TwoHump {
        samples_pass,
        verdict: cert.verdict,
        worst_time: cert.worst_time,
        worst_value: cert.worst_value,
        dense_time,
        dense_value,
    }
}
