use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{active_vertices, lipschitz_constants, violation, PoseTrajectory};
use crate::geometry::{ConvexBody, ConvexRegion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Safe,
    Violated,
    Inconclusive,
}

/// Outcome of the interval search.
///
/// `margin` is the smallest upper bound on `max_t g(t)` that the search
/// established: non-positive for `Safe`, and for the other verdicts the
/// largest bound still open when the search stopped. `worst_time` and
/// `worst_value` give the largest examined center value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyCertificate {
    pub verdict: Verdict,
    pub margin: f64,
    pub worst_time: f64,
    pub worst_value: f64,
    pub violated_hyperplanes: Vec<usize>,
    pub violated_values: Vec<f64>,
    pub active_vertices: Vec<usize>,
    pub intervals_examined: usize,
}

impl SafetyCertificate {
    pub fn is_safe(&self) -> bool {
        self.verdict == Verdict::Safe
    }

    /// Scalar used to compare trajectories during line search.
    pub fn worst_violation(&self) -> f64 {
        match self.verdict {
            Verdict::Violated => self.worst_value,
            _ => self.margin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub min_interval: f64,
    /// Hyperplanes with `g_ℓ(t*) > -margin` are reported as violated.
    pub margin: f64,
    pub max_intervals: usize,
    pub record_bounds: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            min_interval: 1e-5,
            margin: 0.02,
            max_intervals: 200_000,
            record_bounds: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalBound {
    pub t_lo: f64,
    pub t_hi: f64,
    pub center_value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy)]
struct Item {
    u: f64,
    t_lo: f64,
    t_hi: f64,
}

impl PartialEq for Item {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        self.u
            .total_cmp(&other.u)
            .then_with(|| other.t_lo.total_cmp(&self.t_lo))
    }
}

struct Search<'a> {
    traj: &'a PoseTrajectory,
    region: &'a ConvexRegion,
    body: &'a ConvexBody,
    lips: Vec<f64>,
    record: bool,
    log: Vec<IntervalBound>,
    examined: usize,
    top_center: (f64, f64),
    best: Option<(f64, f64)>,
    heap: BinaryHeap<Item>,
}

impl Search<'_> {
    fn examine(&mut self, t_lo: f64, t_hi: f64) {
        let tc = 0.5 * (t_lo + t_hi);
        let h = 0.5 * (t_hi - t_lo);
        let v = violation(self.traj, self.region, self.body, tc);
        let u = v
            .per_halfspace
            .iter()
            .zip(&self.lips)
            .map(|(g, l)| g + l * h)
            .fold(f64::NEG_INFINITY, f64::max);
        self.examined += 1;
        if self.record {
            self.log.push(IntervalBound {
                t_lo,
                t_hi,
                center_value: v.worst,
                bound: u,
            });
        }
        if v.worst > self.top_center.0 {
            self.top_center = (v.worst, tc);
        }
        if v.worst > 0.0 && self.best.is_none_or(|(g, _)| v.worst > g) {
            self.best = Some((v.worst, tc));
        }
        self.heap.push(Item { u, t_lo, t_hi });
    }
}

pub fn verify_continuous(
    traj: &PoseTrajectory,
    region: &ConvexRegion,
    body: &ConvexBody,
    min_interval: f64,
) -> SafetyCertificate {
    let cfg = VerifyConfig {
        min_interval,
        ..Default::default()
    };
    verify_continuous_with(traj, region, body, &cfg).0
}

/// Best-first interval subdivision on `u = max_k [g_k(t_c) + L_k (t_R - t_L)/2]`.
pub fn verify_continuous_with(
    traj: &PoseTrajectory,
    region: &ConvexRegion,
    body: &ConvexBody,
    cfg: &VerifyConfig,
) -> (SafetyCertificate, Vec<IntervalBound>) {
    let mut s = Search {
        traj,
        region,
        body,
        lips: lipschitz_constants(traj, region, body).per_halfspace,
        record: cfg.record_bounds,
        log: Vec::new(),
        examined: 0,
        top_center: (f64::NEG_INFINITY, 0.5),
        best: None,
        heap: BinaryHeap::new(),
    };
    s.examine(0.0, 1.0);
    let mut unresolved = false;
    let mut open_bound = f64::NEG_INFINITY;
    while let Some(item) = s.heap.pop() {
        if item.u <= 0.0 || s.best.is_some_and(|(g, _)| item.u <= g) {
            open_bound = open_bound.max(item.u);
            break;
        }
        let capped = s.examined >= cfg.max_intervals;
        if item.t_hi - item.t_lo <= cfg.min_interval || capped {
            open_bound = open_bound.max(item.u);
            if s.best.is_some() {
                break;
            }
            unresolved = true;
            if capped {
                break;
            }
            continue;
        }
        let mid = 0.5 * (item.t_lo + item.t_hi);
        s.examine(item.t_lo, mid);
        s.examine(mid, item.t_hi);
    }
    let Search {
        log,
        examined: examined_count,
        top_center,
        best,
        ..
    } = s;

    let cert = match best {
        Some((g, t)) => {
            let v = violation(traj, region, body, t);
            let act = active_vertices(traj, region, body, t);
            let mut hyper = Vec::new();
            let mut values = Vec::new();
            let mut verts = Vec::new();
            for (k, gk) in v.per_halfspace.iter().enumerate() {
                if *gk > -cfg.margin {
                    hyper.push(k);
                    values.push(*gk);
                    verts.push(act[k]);
                }
            }
            SafetyCertificate {
                verdict: Verdict::Violated,
                margin: open_bound.max(g),
                worst_time: t,
                worst_value: g,
                violated_hyperplanes: hyper,
                violated_values: values,
                active_vertices: verts,
                intervals_examined: examined_count,
            }
        }
        None => SafetyCertificate {
            verdict: if unresolved {
                Verdict::Inconclusive
            } else {
                Verdict::Safe
            },
            margin: open_bound,
            worst_time: top_center.1,
            worst_value: top_center.0,
            violated_hyperplanes: Vec::new(),
            violated_values: Vec::new(),
            active_vertices: Vec::new(),
            intervals_examined: examined_count,
        },
    };
    (cert, log)
}
