//! End-to-end tests of the `holo` binary: a tiny scene goes through
//! render -> optimize -> eval -> sweep, and the failure paths map to
//! the documented exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use holo_core::io::history::load_history;
use holo_core::io::ldi::save_ldi;
use holo_core::io::stack::load_stack;
use holo_core::ldi::{LayeredDepthImage, LdiLayer};

fn holo() -> Command {
    Command::new(env!("CARGO_BIN_EXE_holo"))
}

fn run_ok(command: &mut Command) -> Output {
    let output = command.output().expect("binary runs");
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn exit_code(command: &mut Command) -> i32 {
    command.output().expect("binary runs").status.code().expect("exit code")
}

/// A 12 x 12 single-layer scene: a bright square in front of a dim
/// backdrop, with depth variation so two focal planes differ.
fn tiny_scene(dir: &Path) {
    let n = 12usize;
    let mut color = vec![[0.08, 0.05, 0.1]; n * n];
    let mut depth = vec![1.5e-3; n * n];
    for y in 3..7 {
        for x in 4..9 {
            color[y * n + x] = [0.9, 0.7, 0.3];
            depth[y * n + x] = -1.5e-3;
        }
    }
    let ldi = LayeredDepthImage::new(n, n, vec![LdiLayer::dense(color, depth)]).unwrap();
    save_ldi(&ldi, dir).unwrap();
}

/// Shrinks the optimizer far below the display-scale defaults so the
/// whole pipeline runs in seconds.
fn tiny_config(path: &Path) {
    fs::write(
        path,
        r#"{
  "optimize": {
    "frames": 1,
    "iterations": 2,
    "step_size": 0.05,
    "channels": [1],
    "pupils": {"total": 2, "fixed": 1, "random": 1}
  }
}
"#,
    )
    .unwrap();
}

#[test]
fn pipeline_runs_end_to_end() {
    let root = tempfile::tempdir().unwrap();
    let scene = root.path().join("scene");
    let stack_dir = root.path().join("stack");
    let batch_dir = root.path().join("batch");
    let config = root.path().join("run.json");
    tiny_scene(&scene);
    tiny_config(&config);

    // Render two focal planes bracketing the scene.
    let output = run_ok(
        holo()
            .args(["render", "--ldi"])
            .arg(&scene)
            .arg("--out")
            .arg(&stack_dir)
            .args(["--planes", "2", "--near", "-2mm", "--far", "2mm"]),
    );
    assert!(String::from_utf8_lossy(&output.stdout).contains("rendered planes=2"));
    let stack = load_stack(&stack_dir).unwrap();
    assert_eq!(stack.plane_count(), 2);
    assert_eq!(stack.plane_depths(), &[-2e-3, 2e-3]);

    // Optimize a one-frame green batch for two iterations.
    let cache = root.path().join("kernels.bin");
    let output = run_ok(
        holo()
            .arg("--config")
            .arg(&config)
            .args(["optimize", "--stack"])
            .arg(&stack_dir)
            .arg("--out")
            .arg(&batch_dir)
            .arg("--kernel-cache")
            .arg(&cache),
    );
    assert!(String::from_utf8_lossy(&output.stdout).contains("optimized iterations=2"));
    assert!(batch_dir.join("manifest.json").is_file());
    assert!(batch_dir.join("config.json").is_file());
    assert!(cache.is_file(), "kernel sidecar should be saved");
    // Two per-iteration rows plus the final forward evaluation.
    let history = load_history(&batch_dir.join("history.csv")).unwrap();
    assert_eq!(history.len(), 3);
    assert!(history.iter().all(|row| row.loss.is_finite()));

    // Score the batch against the stack; the report must parse and the
    // summary must carry finite numbers.
    let report = root.path().join("report.json");
    let recon = root.path().join("recon");
    let output = run_ok(
        holo()
            .arg("--config")
            .arg(&config)
            .args(["eval", "--batch"])
            .arg(&batch_dir)
            .arg("--stack")
            .arg(&stack_dir)
            .arg("--report")
            .arg(&report)
            .arg("--recon")
            .arg(&recon)
            .arg("--kernel-cache")
            .arg(&cache),
    );
    assert!(String::from_utf8_lossy(&output.stdout).contains("evaluated mean_psnr="));
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(parsed["report"]["mean_psnr"].as_f64().unwrap().is_finite());
    assert_eq!(parsed["report"]["planes"].as_array().unwrap().len(), 2);
    // One grayscale preview per plane for the single-channel batch.
    assert!(recon.join("plane_000_c0.png").is_file());
    assert!(recon.join("plane_001_c0.png").is_file());

    // Focus sweep through the same pupil.
    let sweep_dir = root.path().join("sweep");
    run_ok(
        holo()
            .arg("--config")
            .arg(&config)
            .args(["sweep", "focus", "--batch"])
            .arg(&batch_dir)
            .arg("--out")
            .arg(&sweep_dir)
            .args(["--near", "-2mm", "--far", "2mm", "--count", "3"]),
    );
    let index: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(sweep_dir.join("index.json")).unwrap()).unwrap();
    let files = index["files"].as_array().unwrap();
    assert_eq!(index["depths"].as_array().unwrap().len(), 3);
    assert_eq!(files.len(), 3);
    for file in files {
        assert!(sweep_dir.join(file.as_str().unwrap()).is_file());
    }

    // Eye-box sweep over a 2 x 2 lattice of small pupils.
    let eyebox_report = root.path().join("eyebox.json");
    let output = run_ok(
        holo()
            .arg("--config")
            .arg(&config)
            .args(["sweep", "eyebox", "--batch"])
            .arg(&batch_dir)
            .arg("--stack")
            .arg(&stack_dir)
            .arg("--report")
            .arg(&eyebox_report)
            .args(["--side", "2", "--radius", "1mm"]),
    );
    assert!(String::from_utf8_lossy(&output.stdout).contains("swept positions=4"));
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&eyebox_report).unwrap()).unwrap();
    assert_eq!(parsed["sweep"]["points"].as_array().unwrap().len(), 4);
}

#[test]
fn optimizer_runs_are_identical_across_thread_counts() {
    let root = tempfile::tempdir().unwrap();
    let scene = root.path().join("scene");
    let stack_dir = root.path().join("stack");
    let config = root.path().join("run.json");
    tiny_scene(&scene);
    tiny_config(&config);
    run_ok(
        holo()
            .args(["render", "--ldi"])
            .arg(&scene)
            .arg("--out")
            .arg(&stack_dir)
            .args(["--planes", "2", "--near", "-2mm", "--far", "2mm"]),
    );

    let mut histories = Vec::new();
    for threads in ["1", "4"] {
        let out = root.path().join(format!("batch_{threads}"));
        run_ok(
            holo()
                .arg("--config")
                .arg(&config)
                .args(["--threads", threads, "optimize", "--stack"])
                .arg(&stack_dir)
                .arg("--out")
                .arg(&out),
        );
        histories.push(fs::read_to_string(out.join("history.csv")).unwrap());
    }
    assert_eq!(histories[0], histories[1], "loss history must not depend on threading");
}

#[test]
fn oracle_check_passes() {
    let output = run_ok(holo().args(["oracle-check", "--cases", "3", "--seed", "1"]));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("propagation:"));
    assert!(stdout.contains("-> pass"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn bad_inputs_exit_with_the_documented_codes() {
    let root = tempfile::tempdir().unwrap();

    // Unknown configuration keys are a validation error (2).
    let config = root.path().join("bad.json");
    fs::write(&config, r#"{"optimize": {"steps": 5}}"#).unwrap();
    let code = exit_code(
        holo().arg("--config").arg(&config).args(["oracle-check", "--cases", "1"]),
    );
    assert_eq!(code, 2);

    // Invalid optimizer settings are caught before any heavy work (2).
    let scene = root.path().join("scene");
    let stack_dir = root.path().join("stack");
    tiny_scene(&scene);
    run_ok(
        holo()
            .args(["render", "--ldi"])
            .arg(&scene)
            .arg("--out")
            .arg(&stack_dir)
            .args(["--planes", "1", "--near", "0mm", "--far", "0mm"]),
    );
    let config = root.path().join("dupes.json");
    fs::write(&config, r#"{"optimize": {"channels": [1, 1]}}"#).unwrap();
    let code = exit_code(
        holo()
            .arg("--config")
            .arg(&config)
            .args(["optimize", "--stack"])
            .arg(&stack_dir)
            .arg("--out")
            .arg(root.path().join("batch")),
    );
    assert_eq!(code, 2);

    // A missing scene directory is an I/O failure (1).
    let code = exit_code(
        holo()
            .args(["render", "--ldi"])
            .arg(root.path().join("nope"))
            .arg("--out")
            .arg(root.path().join("out")),
    );
    assert_eq!(code, 1);
}
