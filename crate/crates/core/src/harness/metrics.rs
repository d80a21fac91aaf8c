//! Aggregate metrics over a set of episodes.

use thiserror::Error;

use super::episode::{EpisodeResult, ModuleTimings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no episodes to summarize")]
    Empty,
    #[error("length scale undefined: no trial completed")]
    LengthScaleUndefined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub trials: usize,
    /// Mean path length over straight-line distance across completed trials.
    pub length_scale: Result<f64, MetricsError>,
    pub complete_rate: f64,
    pub collision_free_rate: f64,
    pub mean_region_ms: f64,
    pub mean_target_ms: f64,
    pub mean_traj_ms: f64,
}

impl MetricsSummary {
    /// Length scale formatted to two decimals, `N/A` when undefined.
    pub fn length_scale_label(&self) -> String {
        match self.length_scale {
            Ok(v) => format!("{v:.2}"),
            Err(_) => "N/A".to_string(),
        }
    }
}

/// Rates over all trials; collision-free counts every trial regardless of
/// completion. Timings are per call, pooled over all trials.
pub fn compute_metrics(results: &[EpisodeResult]) -> Result<MetricsSummary, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = results.len() as f64;
    let done: Vec<f64> = results
        .iter()
        .filter(|r| r.completed)
        .map(|r| r.length_scale())
        .collect();
    let length_scale = if done.is_empty() {
        Err(MetricsError::LengthScaleUndefined)
    } else {
        Ok(done.iter().sum::<f64>() / done.len() as f64)
    };
    let mut t = ModuleTimings::default();
    for r in results {
        t.add(&r.timings);
    }
    Ok(MetricsSummary {
        trials: results.len(),
        length_scale,
        complete_rate: done.len() as f64 / n,
        collision_free_rate: results.iter().filter(|r| !r.collided).count() as f64 / n,
        mean_region_ms: t.mean_region_ms(),
        mean_target_ms: t.mean_target_ms(),
        mean_traj_ms: t.mean_traj_ms(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::episode::{run_episode, PlannerConfig};
    use crate::harness::scene::generate_scene;

    fn straight() -> EpisodeResult {
        let mut s = generate_scene(0.6, 2).unwrap();
        s.obstacles.clear();
        run_episode(&s, &PlannerConfig::default())
    }

    #[test]
    fn single_clean_trial() {
        let mut r = straight();
        r.path_length = r.straight_line;
        let m = compute_metrics(&[r]).unwrap();
        assert_eq!(m.length_scale, Ok(1.0));
        assert_eq!(m.complete_rate, 1.0);
        assert_eq!(m.collision_free_rate, 1.0);
    }

    #[test]
    fn half_and_half() {
        let ok = straight();
        let mut bad = ok.clone();
        bad.completed = false;
        bad.collided = true;
        let m = compute_metrics(&[ok, bad]).unwrap();
        assert_eq!(m.complete_rate, 0.5);
        assert_eq!(m.collision_free_rate, 0.5);
    }

    #[test]
    fn nothing_completed_is_na() {
        let mut r = straight();
        r.completed = false;
        let m = compute_metrics(&[r]).unwrap();
        assert_eq!(m.length_scale, Err(MetricsError::LengthScaleUndefined));
        assert_eq!(m.length_scale_label(), "N/A");
        assert_eq!(compute_metrics(&[]), Err(MetricsError::Empty));
    }
}
