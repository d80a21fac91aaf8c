use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use freenav::harness::{
    generate_scene, render_svg, run_bench, run_episode, BenchConfig, EpisodeLog, PlannerConfig,
    Scene,
};

#[derive(Parser)]
#[command(name = "freenav", version, about = "Random-scene navigation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random cylinder scene.
    GenScene {
        /// Obstacles per square meter.
        #[arg(long)]
        density: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one episode on a scene file and write its log.
    Run {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        no_direction_aware: bool,
        #[arg(long)]
        no_continuous_safety: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep densities for the full method and both ablations.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "0.6,0.8,1.0,1.2")]
        densities: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        scenarios: usize,
        #[arg(long, default_value_t = 4)]
        trials: usize,
        /// Scene seed of the first scenario.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Optional per-trial CSV.
        #[arg(long)]
        trials_out: Option<PathBuf>,
    },
    /// Draw an episode log as SVG.
    Render {
        #[arg(long)]
        episode: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write(path: &PathBuf, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenScene { density, seed, out } => {
            let scene = generate_scene(density, seed)?;
            write(&out, &scene.to_json())?;
            println!(
                "{} obstacles, scene seed {}",
                scene.obstacles.len(),
                scene.seed
            );
        }
        Command::Run {
            scene,
            no_direction_aware,
            no_continuous_safety,
            out,
        } => {
            let scene = Scene::from_json(&read(&scene)?)?;
            let cfg = PlannerConfig {
                no_direction_aware,
                no_continuous_safety,
                ..PlannerConfig::default()
            };
            let r = run_episode(&scene, &cfg);
            write(&out, &serde_json::to_string_pretty(&r.log)?)?;
            println!(
                "{:?}: completed={} collided={} length_scale={:.3} steps={}",
                r.termination,
                r.completed,
                r.collided,
                r.length_scale(),
                r.steps
            );
        }
        Command::Bench {
            densities,
            scenarios,
            trials,
            seed,
            out,
            trials_out,
        } => {
            let cfg = BenchConfig {
                densities,
                scenarios,
                trials,
                base_seed: seed,
                ..BenchConfig::default()
            };
            let report = run_bench(&cfg)?;
            let csv = report.to_csv();
            write(&out, &csv)?;
            if let Some(p) = trials_out {
                write(&p, &report.trials_csv())?;
            }
            print!("{csv}");
        }
        Command::Render { episode, out } => {
            let log: EpisodeLog = serde_json::from_str(&read(&episode)?)?;
            write(&out, &render_svg(&log))?;
        }
    }
    Ok(())
}
