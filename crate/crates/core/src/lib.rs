//! Local navigation for a convex robot among disc obstacles.
//!
//! The planner grows direction-biased convex free regions from LiDAR
//! points, certifies Bezier pose trajectories inside them over continuous
//! time, and backtracks through a graph of visited poses when a direction
//! dead-ends. See the `book/` guide for a walkthrough.

pub mod geometry;
pub mod graph;
pub mod harness;
pub mod perception;
pub mod region;
pub mod solvers;
pub mod trajectory;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/perception.md")]
    mod perception {}
    #[doc = include_str!("../../../book/src/regions.md")]
    mod regions {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/refinement.md")]
    mod refinement {}
    #[doc = include_str!("../../../book/src/graph.md")]
    mod graph {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}
