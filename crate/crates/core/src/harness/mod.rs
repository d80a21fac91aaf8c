//! Scenes, episodes, metrics and file outputs for benchmark runs.

pub mod bench;
pub mod episode;
pub mod metrics;
pub mod render;
pub mod scene;

pub use bench::{run_bench, BenchConfig, BenchReport, Variant};
pub use episode::{run_episode, EpisodeLog, EpisodeResult, PlannerConfig};
pub use metrics::{compute_metrics, MetricsSummary};
pub use render::render_svg;
pub use scene::{generate_scene, Scene};
