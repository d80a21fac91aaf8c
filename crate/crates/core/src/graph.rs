//! Region graph for incremental planning.
//!
//! Nodes are poses the robot has reached, each with the free region it was
//! planned from. Edges are candidate motions; they are certified lazily when
//! selected and either executed (creating a node) or marked invalid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{halfspace_violation, ConvexBody, ConvexRegion, Point, Pose, UnitDirection};
use crate::trajectory::{wrap_angle, PoseTrajectory, SafetyCertificate, TargetPose};

pub const DUPLICATE_DISTANCE: f64 = 0.1;
pub const DUPLICATE_HEADING: f64 = 10.0 * PI / 180.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    pub pose: Pose,
    pub region: ConvexRegion,
    /// Executed edge that created this node; `None` for the root.
    pub parent_edge: Option<usize>,
    /// Index of the scan taken here, in the episode log.
    pub scan: Option<usize>,
    /// Length of the executed tree path from the root.
    #[serde(default)]
    pub root_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeStatus {
    Untried,
    Certified,
    Invalid,
    Executed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierEdge {
    pub id: usize,
    pub source: usize,
    pub direction: UnitDirection,
    pub target: Pose,
    pub progress: f64,
    pub status: EdgeStatus,
    /// Region the target was selected in; the trajectory is certified against it.
    pub region: ConvexRegion,
    pub trajectory: Option<PoseTrajectory>,
    pub certificate: Option<SafetyCertificate>,
    pub goal_override: bool,
}

/// One leg of executed motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionLeg {
    pub edge: usize,
    pub reversed: bool,
    pub trajectory: PoseTrajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub edge: usize,
    pub status: EdgeStatus,
    pub new_node: Option<usize>,
    /// Backtracking legs followed by the new edge; empty when invalidated.
    pub motion: Vec<MotionLeg>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<FrontierEdge>,
    pub current: usize,
    pub goal: Point,
    pub goal_tolerance: f64,
    /// Targets closer than this to a node with a similar heading are dropped.
    pub duplicate_distance: f64,
    pub duplicate_heading: f64,
    /// Also treat targets of existing edges as occupied.
    pub dedup_edges: bool,
    /// Weight of tree travel from the current node in edge selection.
    pub travel_weight: f64,
}

/// Goal-pose override settings for [`NavGraph::expand_node`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalCheck<'a> {
    pub body: &'a ConvexBody,
    pub n_yaw: usize,
    /// Required worst-violation slack; zero accepts touching placements.
    pub clearance: f64,
}

impl NavGraph {
    pub fn new(root: Pose, region: ConvexRegion, goal: Point, goal_tolerance: f64) -> Self {
        Self {
            nodes: vec![GraphNode {
                id: 0,
                pose: root,
                region,
                parent_edge: None,
                scan: None,
                root_distance: 0.0,
            }],
            edges: Vec::new(),
            current: 0,
            goal,
            goal_tolerance,
            duplicate_distance: DUPLICATE_DISTANCE,
            duplicate_heading: DUPLICATE_HEADING,
            dedup_edges: false,
            travel_weight: 0.0,
        }
    }

    pub fn current_node(&self) -> &GraphNode {
        &self.nodes[self.current]
    }

    pub fn goal_reached(&self, p: &Point) -> bool {
        (p - self.goal).norm() <= self.goal_tolerance
    }

    fn near(&self, a: &Pose, b: &Pose) -> bool {
        (a.position - b.position).norm() < self.duplicate_distance
            && wrap_angle(a.heading - b.heading).abs() < self.duplicate_heading
    }

    fn is_duplicate(&self, pose: &Pose) -> bool {
        self.nodes.iter().any(|n| self.near(&n.pose, pose))
            || (self.dedup_edges && self.edges.iter().any(|e| self.near(&e.target, pose)))
    }

    /// Heading at which the body fits at the goal inside `region`, closest to
    /// `reference` among `n_yaw` samples.
    fn goal_heading(
        &self,
        region: &ConvexRegion,
        check: &GoalCheck,
        reference: f64,
    ) -> Option<f64> {
        let n = check.n_yaw.max(1);
        let mut offsets: Vec<f64> = (0..n)
            .map(|s| PI * (2.0 * s as f64 - n as f64) / n as f64)
            .collect();
        offsets.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        offsets.into_iter().map(|d| reference + d).find(|&h| {
            let pose = Pose {
                position: self.goal,
                heading: h,
            };
            halfspace_violation(region, check.body, &pose).worst <= -check.clearance
        })
    }

    /// Adds one untried edge per direction unless its target duplicates an
    /// existing node. When the body fits at the goal inside one of the
    /// regions, the first such edge targets the goal instead.
    pub fn expand_node(
        &mut self,
        node: usize,
        directions: &[UnitDirection],
        regions: &[ConvexRegion],
        targets: &[TargetPose],
        goal: Option<GoalCheck>,
    ) -> Vec<usize> {
        let reference = self.nodes[node].pose.heading;
        let mut override_at = None;
        if let Some(check) = goal {
            for (i, r) in regions.iter().enumerate() {
                if let Some(h) = self.goal_heading(r, &check, reference) {
                    override_at = Some((i, h));
                    break;
                }
            }
        }
        let mut created = Vec::new();
        for (i, ((d, r), t)) in directions.iter().zip(regions).zip(targets).enumerate() {
            let (target, progress, is_goal) = match override_at {
                Some((j, h)) if j == i => {
                    let pose = Pose {
                        position: self.goal,
                        heading: h,
                    };
                    let progress = d
                        .vector()
                        .dot(&(self.goal - self.nodes[node].pose.position));
                    (pose, progress, true)
                }
                _ => (t.pose, t.progress, false),
            };
            if self.is_duplicate(&target) {
                continue;
            }
            let id = self.edges.len();
            self.edges.push(FrontierEdge {
                id,
                source: node,
                direction: *d,
                target,
                progress,
                status: EdgeStatus::Untried,
                region: r.clone(),
                trajectory: None,
                certificate: None,
                goal_override: is_goal,
            });
            created.push(id);
        }
        created
    }

    /// Untried edge whose target is closest to the goal; lowest id on ties.
    ///
    /// With a positive `travel_weight` the tree distance from the current
    /// node to the edge source is added to the score.
    pub fn select_frontier_edge(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        let up = self.ancestors(self.current);
        for e in self
            .edges
            .iter()
            .filter(|e| e.status == EdgeStatus::Untried)
        {
            let mut d = (e.target.position - self.goal).norm();
            if self.travel_weight > 0.0 {
                d += self.travel_weight * self.tree_distance(&up, e.source);
            }
            if best.is_none_or(|(_, b)| d < b - 1e-12) {
                best = Some((e.id, d));
            }
        }
        best.map(|b| b.0)
    }

    /// Path length between the node whose ancestors are `up` and `node`.
    fn tree_distance(&self, up: &[usize], mut node: usize) -> f64 {
        let from = self.nodes[up[0]].root_distance;
        let to = self.nodes[node].root_distance;
        loop {
            if up.contains(&node) {
                return from + to - 2.0 * self.nodes[node].root_distance;
            }
            let e = self.nodes[node].parent_edge.expect("root is a common ancestor");
            node = self.edges[e].source;
        }
    }

    /// Nodes from `node` up to the root.
    fn ancestors(&self, mut node: usize) -> Vec<usize> {
        let mut out = vec![node];
        while let Some(e) = self.nodes[node].parent_edge {
            node = self.edges[e].source;
            out.push(node);
        }
        out
    }

    /// Executed legs leading from the current node to `target` through the
    /// tree: reversed edges up to the common ancestor, forward edges down.
    pub fn route_to(&self, target: usize) -> Vec<MotionLeg> {
        let up = self.ancestors(self.current);
        let down = self.ancestors(target);
        let lca = *up
            .iter()
            .find(|n| down.contains(n))
            .expect("nodes share the root");
        let mut legs = Vec::new();
        for &n in up.iter().take_while(|&&n| n != lca) {
            let e = self.nodes[n].parent_edge.expect("non-root node");
            let traj = self.edges[e]
                .trajectory
                .as_ref()
                .expect("executed edge has a trajectory");
            legs.push(MotionLeg {
                edge: e,
                reversed: true,
                trajectory: traj.reversed(),
            });
        }
        let descent: Vec<usize> = down.iter().take_while(|&&n| n != lca).copied().collect();
        for &n in descent.iter().rev() {
            let e = self.nodes[n].parent_edge.expect("non-root node");
            let traj = self.edges[e]
                .trajectory
                .as_ref()
                .expect("executed edge has a trajectory");
            legs.push(MotionLeg {
                edge: e,
                reversed: false,
                trajectory: traj.clone(),
            });
        }
        legs
    }

    /// Applies the outcome of trajectory generation for `edge`.
    ///
    /// On success the robot travels to the edge source (if needed) and then
    /// along the new trajectory; the new node stores `fresh_region` when the
    /// body fits in it at the arrival pose, and the edge region otherwise.
    pub fn commit_or_invalidate(
        &mut self,
        edge: usize,
        result: Option<(PoseTrajectory, SafetyCertificate)>,
        body: &ConvexBody,
        fresh_region: impl FnOnce(&Pose) -> Option<ConvexRegion>,
    ) -> Transition {
        assert_eq!(
            self.edges[edge].status,
            EdgeStatus::Untried,
            "edge already resolved"
        );
        let Some((traj, cert)) = result else {
            self.edges[edge].status = EdgeStatus::Invalid;
            return Transition {
                edge,
                status: EdgeStatus::Invalid,
                new_node: None,
                motion: Vec::new(),
            };
        };
        debug_assert!(cert.is_safe());
        let mut motion = self.route_to(self.edges[edge].source);
        motion.push(MotionLeg {
            edge,
            reversed: false,
            trajectory: traj.clone(),
        });
        let pose = traj.end();
        let root_distance =
            self.nodes[self.edges[edge].source].root_distance + traj.path_length(200);
        let region = fresh_region(&pose)
            .filter(|r| halfspace_violation(r, body, &pose).worst <= 0.0)
            .unwrap_or_else(|| self.edges[edge].region.clone());
        assert!(
            halfspace_violation(&region, body, &pose).worst <= 1e-9,
            "node region must contain the body"
        );
        let e = &mut self.edges[edge];
        e.status = EdgeStatus::Executed;
        e.trajectory = Some(traj);
        e.certificate = Some(cert);
        let id = self.nodes.len();
        self.nodes.push(GraphNode {
            id,
            pose,
            region,
            parent_edge: Some(edge),
            scan: None,
            root_distance,
        });
        self.current = id;
        Transition {
            edge,
            status: EdgeStatus::Executed,
            new_node: Some(id),
            motion,
        }
    }

    pub fn untried_count(&self) -> usize {
        self.edges
            .iter()
            .filter(|e| e.status == EdgeStatus::Untried)
            .count()
    }
}
