//! Density sweeps with ablation variants and CSV output.

use std::fmt::Write;

use super::episode::{run_episode, PlannerConfig, Termination};
use super::metrics::{compute_metrics, MetricsError, MetricsSummary};
use super::scene::{generate_scene, SceneError};

pub const CSV_HEADER: &str =
    "density,variant,length_scale,complete_rate,collision_free_rate,t_region_ms,t_target_ms,t_traj_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub no_direction_aware: bool,
    pub no_continuous_safety: bool,
}

impl Variant {
    pub const FULL: Variant = Variant {
        no_direction_aware: false,
        no_continuous_safety: false,
    };
    pub const NO_DIRECTION_AWARE: Variant = Variant {
        no_direction_aware: true,
        no_continuous_safety: false,
    };
    pub const NO_CONTINUOUS_SAFETY: Variant = Variant {
        no_direction_aware: false,
        no_continuous_safety: true,
    };

    pub fn apply(&self, cfg: &PlannerConfig) -> PlannerConfig {
        PlannerConfig {
            no_direction_aware: self.no_direction_aware,
            no_continuous_safety: self.no_continuous_safety,
            ..cfg.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub densities: Vec<f64>,
    pub scenarios: usize,
    pub trials: usize,
    /// Scenario `s` uses scene seed `base_seed + s` at every density.
    pub base_seed: u64,
    pub planner: PlannerConfig,
    pub variants: Vec<Variant>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            densities: vec![0.6, 0.8, 1.0, 1.2],
            scenarios: 5,
            trials: 4,
            base_seed: 0,
            planner: PlannerConfig::default(),
            variants: vec![
                Variant::FULL,
                Variant::NO_DIRECTION_AWARE,
                Variant::NO_CONTINUOUS_SAFETY,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub density: f64,
    pub variant: &'static str,
    pub scenario: usize,
    pub trial: usize,
    pub scene_seed: u64,
    pub completed: bool,
    pub collided: bool,
    pub termination: Termination,
    pub length_scale: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub density: f64,
    pub variant: &'static str,
    pub summary: MetricsSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("bench needs at least one density, scenario, trial and variant")]
    EmptySweep,
    #[error("density must be positive, got {0}")]
    Density(f64),
}

/// Runs every (density, variant) cell. Trial `t` of a scenario runs the
/// scene's symmetric variant `t mod 4`, so scenarios repeat beyond four
/// trials.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    if cfg.densities.is_empty() || cfg.scenarios == 0 || cfg.trials == 0 || cfg.variants.is_empty()
    {
        return Err(BenchError::EmptySweep);
    }
    if let Some(&d) = cfg.densities.iter().find(|&&d| !(d > 0.0)) {
        return Err(BenchError::Density(d));
    }
    let mut rows = Vec::new();
    let mut trials = Vec::new();
    for &density in &cfg.densities {
        let scenes = (0..cfg.scenarios)
            .map(|s| generate_scene(density, cfg.base_seed + s as u64))
            .collect::<Result<Vec<_>, _>>()?;
        for v in &cfg.variants {
            let planner = v.apply(&cfg.planner);
            let variant = planner.variant_name();
            let mut results = Vec::new();
            for (s, scene) in scenes.iter().enumerate() {
                for t in 0..cfg.trials {
                    let r = run_episode(&scene.symmetric_variant(t as u32), &planner);
                    trials.push(TrialRecord {
                        density,
                        variant,
                        scenario: s,
                        trial: t,
                        scene_seed: scene.seed,
                        completed: r.completed,
                        collided: r.collided,
                        termination: r.termination,
                        length_scale: r.length_scale(),
                        steps: r.steps,
                    });
                    results.push(r);
                }
            }
            rows.push(BenchRow {
                density,
                variant,
                summary: compute_metrics(&results)?,
            });
        }
    }
    Ok(BenchReport { rows, trials })
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let m = &r.summary;
            writeln!(
                s,
                "{:.1},{},{},{:.2},{:.2},{:.3},{:.3},{:.3}",
                r.density,
                r.variant,
                m.length_scale_label(),
                m.complete_rate,
                m.collision_free_rate,
                m.mean_region_ms,
                m.mean_target_ms,
                m.mean_traj_ms
            )
            .unwrap();
        }
        s
    }

    /// One line per trial, for auditing shortfalls.
    pub fn trials_csv(&self) -> String {
        let mut s = String::from(
            "density,variant,scenario,trial,scene_seed,completed,collided,termination,length_scale,steps\n",
        );
        for t in &self.trials {
            writeln!(
                s,
                "{:.1},{},{},{},{},{},{},{:?},{:.4},{}",
                t.density,
                t.variant,
                t.scenario,
                t.trial,
                t.scene_seed,
                t.completed,
                t.collided,
                t.termination,
                t.length_scale,
                t.steps
            )
            .unwrap();
        }
        s
    }

    pub fn row(&self, density: f64, variant: &str) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.density == density && r.variant == variant)
    }
}

/// Drops the three timing columns, which vary between runs.
pub fn strip_timings(csv: &str) -> String {
    csv.lines()
        .map(|l| l.split(',').take(5).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
}
