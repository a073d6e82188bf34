//! Drives the `healthscope` binary through every subcommand.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_healthscope"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = run(args, out);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn staged_commands_match_the_one_shot_pipeline() {
    let cfg = config("fail_stop_ds17.toml");
    let cfg = cfg.to_str().unwrap();
    let staged = tempfile::tempdir().unwrap();
    let dir = staged.path();

    let topo = ok(&["topo", "gen", "--config", cfg], dir);
    assert!(topo.contains("16 HA pairs"), "{topo}");
    assert!(dir.join("topology.json").exists());

    ok(&["sim", "run", "--config", cfg], dir);
    for f in ["plan.json", "scenario.json", "trace.jsonl", "ground_truth.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let infer = ok(&["infer", "--config", cfg], dir);
    assert!(infer.contains("window 1: 1 flagged"), "{infer}");
    let diagnose = ok(&["diagnose", "--config", cfg], dir);
    assert!(diagnose.contains("window 1 DS17: Failure"), "{diagnose}");
    let score = ok(&["score", "--config", cfg], dir);
    assert!(score.contains("TP 1 FN 0 FP 0"), "{score}");
    let heat = ok(&["heatmap", "--config", cfg], dir);
    assert!(heat.contains("wrote 4 heatmaps"), "{heat}");
    let csv = std::fs::read_to_string(dir.join("heatmap_w1_d1.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("DS17"));

    let oneshot = tempfile::tempdir().unwrap();
    let pipe = ok(&["pipeline", "--config", cfg], oneshot.path());
    assert_eq!(pipe, score);
    for f in ["trace.jsonl", "posteriors.jsonl", "diagnoses.jsonl"] {
        assert_eq!(
            std::fs::read(dir.join(f)).unwrap(),
            std::fs::read(oneshot.path().join(f)).unwrap(),
            "{f}"
        );
    }
    // Scores agree apart from the wall-clock timings.
    let scores = [dir, oneshot.path()].map(|d| {
        let mut v: serde_json::Value =
            serde_json::from_slice(&std::fs::read(d.join("score.json")).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("window_latency_ms");
        v
    });
    assert_eq!(scores[0], scores[1]);
}

#[test]
fn flags_override_the_config() {
    let out = tempfile::tempdir().unwrap();
    let text = ok(&["topo", "gen", "--scale", "minimal"], out.path());
    assert!(text.contains("1 HA pairs"), "{text}");
    let a = ok(&["pipeline", "--scale", "ci", "--windows", "1", "--seed", "3"], out.path());
    let b = ok(&["pipeline", "--scale", "ci", "--windows", "1", "--seed", "3"], out.path());
    assert_eq!(a, b);
    assert!(a.contains("TP 0 FN 0 FP 0"), "{a}");
}

#[test]
fn bad_inputs_exit_nonzero() {
    let out = tempfile::tempdir().unwrap();
    let bad = out.path().join("bad.toml");
    std::fs::write(&bad, "scale = \"ci\"\nwindowz = 3\n").unwrap();
    let o = run(&["pipeline", "--config", bad.to_str().unwrap()], out.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("windowz"));

    let o = run(&["topo", "gen", "--scale", "galaxy"], out.path());
    assert!(!o.status.success());

    // Stages that need earlier outputs fail cleanly on an empty directory.
    let empty = tempfile::tempdir().unwrap();
    let o = run(&["infer", "--scale", "ci"], empty.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}
