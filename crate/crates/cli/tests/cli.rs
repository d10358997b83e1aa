use std::path::Path;
use std::process::{Command, Output};

fn actkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_actkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn approx_prints_the_swish_gap() {
    let text = stdout(&actkit(&[
        "approx",
        "--a",
        "swish",
        "--b",
        "hardswish",
        "--lo",
        "-10",
        "--hi",
        "10",
    ]));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x_at_max,err"));
    let (x, err) = lines.next().unwrap().split_once(',').unwrap();
    assert!((x.parse::<f64>().unwrap().abs() - 3.0).abs() < 1e-3);
    assert!((err.parse::<f64>().unwrap() - 0.1422776).abs() < 1e-4);
}

#[test]
fn sites_lists_every_activation() {
    let text = stdout(&actkit(&[
        "sites", "--preset", "mini-x3d", "--blocks", "3,5,11,7",
    ]));
    assert_eq!(text.lines().next(), Some("site_id,band,kind"));
    assert_eq!(text.lines().count(), 1 + 1 + 2 * 26);
    assert!(text.contains("stage3.block11.act_b,B,swish"));

    let json = stdout(&actkit(&["sites", "--preset", "mini-resnet", "--json"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["preset"], "mini-resnet");
    assert_eq!(v["stages"].as_array().unwrap().len(), 4);
}

#[test]
fn phases_then_smooth() {
    let dir = tempfile::tempdir().unwrap();
    let phases = dir.path().join("phases.csv");
    let sweep = dir.path().join("sweep.csv");
    stdout(&actkit(&["gen-phases", "--out", p(&phases)]));
    let out = actkit(&[
        "smooth",
        "--in",
        p(&phases),
        "--windows",
        "1,32,2048",
        "--out",
        p(&sweep),
    ]);
    stdout(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("best window 32"));
    let text = std::fs::read_to_string(&sweep).unwrap();
    let acc: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
        .collect();
    assert_eq!(acc.len(), 3);
    assert!(acc[1] > acc[0] && acc[2] < acc[1]);
}

#[test]
fn grid_writes_json_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let cfg_json = serde_json::json!({
        "label": "cli",
        "preset": "mini-resnet",
        "dataset": {"source": "synthetic", "train_size": 32, "test_size": 16, "seed": 1},
        "hyperparams": {"lr": 0.01, "momentum": 0.9, "batch_size": 16, "epochs": 1},
        "seeds": [3]
    });
    std::fs::write(&cfg, cfg_json.to_string()).unwrap();
    let out = dir.path().join("grid.json");
    stdout(&actkit(&[
        "grid",
        "--config",
        p(&cfg),
        "--placements",
        "last,middle&band-a",
        "--out",
        p(&out),
    ]));
    let reports: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let labels: Vec<&str> = reports
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["baseline", "last", "middle&band-a"]);
    assert_eq!(
        reports[0]["runs"][0]["init_hash"],
        reports[2]["runs"][0]["init_hash"]
    );

    let csv = dir.path().join("train.csv");
    stdout(&actkit(&["train", "--config", p(&cfg), "--out", p(&csv)]));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("label,preset,seed,test_accuracy"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let out = actkit(&["sites", "--preset", "nope"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = actkit(&["bench", "--n", "10"]);
    assert!(!out.status.success());

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "frame,truth,p0\n").unwrap();
    assert!(!actkit(&["smooth", "--in", p(&bad)]).status.success());
}
