use std::path::Path;
use std::process::Command;

fn freenav(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_freenav"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn tmp(name: &str) -> String {
    Path::new(env!("CARGO_TARGET_TMPDIR"))
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn scene_run_render_pipeline() {
    let scene = tmp("cli_scene.json");
    let episode = tmp("cli_episode.json");
    let svg = tmp("cli_plot.svg");
    freenav(&["gen-scene", "--density", "0.6", "--seed", "7", "--out", &scene]);
    let text = std::fs::read_to_string(&scene).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["obstacles"].as_array().unwrap().len(), 15);
    let keys = ["\"workspace\"", "\"obstacles\"", "\"start\"", "\"goal\"", "\"robot\"", "\"seed\""];
    let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "field order {pos:?}");

    let line = freenav(&["run", "--scene", &scene, "--out", &episode]);
    assert!(line.contains("collided=false"), "{line}");
    let log: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&episode).unwrap()).unwrap();
    assert_eq!(log["version"], 1);
    assert_eq!(log["variant"], "full");

    freenav(&["render", "--episode", &episode, "--out", &svg]);
    let a = std::fs::read_to_string(&svg).unwrap();
    assert!(a.starts_with("<svg"));
    freenav(&["render", "--episode", &episode, "--out", &svg]);
    assert_eq!(a, std::fs::read_to_string(&svg).unwrap());
}

#[test]
fn ablation_flags_reach_the_log() {
    let scene = tmp("cli_scene_ablate.json");
    let episode = tmp("cli_episode_ablate.json");
    freenav(&["gen-scene", "--density", "0.6", "--seed", "2", "--out", &scene]);
    freenav(&[
        "run",
        "--scene",
        &scene,
        "--no-continuous-safety",
        "--out",
        &episode,
    ]);
    let log: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&episode).unwrap()).unwrap();
    assert_eq!(log["variant"], "no_continuous_safety");
}

#[test]
fn bench_writes_csv() {
    let csv = tmp("cli_metrics.csv");
    freenav(&[
        "bench",
        "--densities",
        "0.6",
        "--scenarios",
        "1",
        "--trials",
        "1",
        "--out",
        &csv,
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "density,variant,length_scale,complete_rate,collision_free_rate,t_region_ms,t_target_ms,t_traj_ms"
    );
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0.6,full,"));
}
