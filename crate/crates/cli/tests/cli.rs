use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deeptrack"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn simulate(dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "simulate",
        "--detections",
        "det.jsonl",
        "--truth",
        "gt.jsonl",
        "--meta",
        "meta.jsonl",
    ];
    args.extend_from_slice(extra);
    ok(dir, &args);
}

#[test]
fn simulate_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(
        p,
        &[
            "simulate",
            "--kind",
            "swipe",
            "--seed",
            "7",
            "--noise-std",
            "1",
            "--detections",
            "a.jsonl",
            "--truth",
            "ga.jsonl",
        ],
    );
    ok(
        p,
        &[
            "simulate",
            "--kind",
            "swipe",
            "--seed",
            "7",
            "--noise-std",
            "1",
            "--detections",
            "b.jsonl",
            "--truth",
            "gb.jsonl",
        ],
    );
    assert_eq!(
        std::fs::read(p.join("a.jsonl")).unwrap(),
        std::fs::read(p.join("b.jsonl")).unwrap()
    );
    assert_eq!(
        std::fs::read(p.join("ga.jsonl")).unwrap(),
        std::fs::read(p.join("gb.jsonl")).unwrap()
    );
}

#[test]
fn clean_detections_match_truth() {
    let d = tempfile::tempdir().unwrap();
    simulate(
        d.path(),
        &[
            "--kind",
            "mixed",
            "--noise-std",
            "0",
            "--p-miss",
            "0",
            "--clutter",
            "0",
        ],
    );
    let det = lines(&d.path().join("det.jsonl"));
    let gt = lines(&d.path().join("gt.jsonl"));
    assert_eq!(det.len(), gt.len());
    let key = |v: &Value| {
        let mut b: Vec<String> = v
            .as_array()
            .unwrap()
            .iter()
            .map(|o| format!("{} {} {} {}", o["x"], o["y"], o["w"], o["h"]))
            .collect();
        b.sort();
        b
    };
    for (a, b) in det.iter().zip(&gt) {
        assert_eq!(key(&a["detections"]), key(&b["targets"]));
    }
}

#[test]
fn bad_flags_exit_2() {
    let d = tempfile::tempdir().unwrap();
    for args in [
        vec![
            "simulate",
            "--duration",
            "0",
            "--detections",
            "a",
            "--truth",
            "b",
        ],
        vec![
            "simulate",
            "--p-miss",
            "2",
            "--detections",
            "a",
            "--truth",
            "b",
        ],
        vec!["track", "--lambda", "1.5", "-i", "a", "-o", "b"],
        vec!["track", "--bogus"],
        vec![
            "simulate",
            "--kind",
            "wave",
            "--detections",
            "a",
            "--truth",
            "b",
        ],
    ] {
        let out = run(d.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn empty_input_tracks_to_empty_output() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("det.jsonl"), "").unwrap();
    ok(d.path(), &["track", "-i", "det.jsonl", "-o", "t.jsonl"]);
    assert_eq!(
        std::fs::read_to_string(d.path().join("t.jsonl")).unwrap(),
        ""
    );
}

#[test]
fn swipe_yields_one_confirmed_track() {
    let d = tempfile::tempdir().unwrap();
    simulate(d.path(), &["--kind", "swipe", "--seed", "3"]);
    ok(d.path(), &["track", "-i", "det.jsonl", "-o", "t.jsonl"]);
    let frames = lines(&d.path().join("t.jsonl"));
    assert_eq!(frames.len(), 60);
    for (f, frame) in frames.iter().enumerate() {
        let tracks = frame["tracks"].as_array().unwrap();
        if f < 2 {
            assert!(tracks.is_empty());
        } else {
            assert_eq!(tracks.len(), 1, "frame {f}");
            assert_eq!(tracks[0]["id"], 1);
            assert_eq!(tracks[0]["status"], "confirmed");
        }
    }
}

#[test]
fn malformed_line_exit_3_names_line() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(
        d.path().join("det.jsonl"),
        "{\"frame\":0,\"detections\":[]}\n{\"frame\":1,\"detections\":[{\"x\":1\n",
    )
    .unwrap();
    let out = run(d.path(), &["track", "-i", "det.jsonl", "-o", "t.jsonl"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("det.jsonl:2"));
    assert!(!d.path().join("t.jsonl").exists());

    std::fs::write(
        d.path().join("bad.jsonl"),
        "{\"frame\":0,\"detections\":[{\"x\":1,\"y\":1,\"w\":-2,\"h\":3,\"conf\":0.5,\"emb\":null}]}\n",
    )
    .unwrap();
    let out = run(d.path(), &["track", "-i", "bad.jsonl", "-o", "t.jsonl"]);
    assert_eq!(out.status.code(), Some(3));
}

fn report(dir: &Path, tracks: &str, truth: &str) -> Value {
    let out = ok(dir, &["evaluate", "--tracks", tracks, "--truth", truth]);
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn evaluate_perfect_and_empty() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    simulate(p, &["--kind", "occlusion", "--seed", "4"]);
    // Visible ground truth rewritten as a tracks file.
    let perfect: Vec<String> = lines(&p.join("gt.jsonl"))
        .iter()
        .map(|f| {
            let tracks: Vec<Value> = f["targets"]
                .as_array()
                .unwrap()
                .iter()
                .filter(|t| t["visible"] == true)
                .map(|t| serde_json::json!({"id": t["gid"], "x": t["x"], "y": t["y"], "w": t["w"], "h": t["h"], "status": "confirmed"}))
                .collect();
            serde_json::json!({"frame": f["frame"], "tracks": tracks}).to_string()
        })
        .collect();
    std::fs::write(p.join("perfect.jsonl"), perfect.join("\n")).unwrap();
    let r = report(p, "perfect.jsonl", "gt.jsonl");
    for k in ["precision", "recall", "f1", "mota"] {
        assert_eq!(r[k], 1.0, "{k}");
    }
    assert_eq!(r["id_switches"], 0);

    let empty: Vec<String> = (0..60)
        .map(|f| format!("{{\"frame\":{f},\"tracks\":[]}}"))
        .collect();
    std::fs::write(p.join("empty.jsonl"), empty.join("\n")).unwrap();
    let r = report(p, "empty.jsonl", "gt.jsonl");
    assert_eq!(r["recall"], 0.0);
}

#[test]
fn evaluate_three_frame_switch() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    let b = "\"x\":100.0,\"y\":100.0,\"w\":40.0,\"h\":40.0";
    let gt: Vec<String> = (0..3)
        .map(|f| format!("{{\"frame\":{f},\"targets\":[{{\"gid\":1,{b},\"visible\":true}}]}}"))
        .collect();
    let tr: Vec<String> = [1, 1, 2]
        .iter()
        .enumerate()
        .map(|(f, id)| {
            format!("{{\"frame\":{f},\"tracks\":[{{\"id\":{id},{b},\"status\":\"confirmed\"}}]}}")
        })
        .collect();
    std::fs::write(p.join("gt.jsonl"), gt.join("\n")).unwrap();
    std::fs::write(p.join("t.jsonl"), tr.join("\n")).unwrap();
    let r = report(p, "t.jsonl", "gt.jsonl");
    assert_eq!(r["id_switches"], 1);
    assert_eq!(r["mota"].as_f64().unwrap(), 1.0 - 1.0 / 3.0);

    std::fs::write(p.join("short.jsonl"), tr[..2].join("\n")).unwrap();
    let out = run(
        p,
        &["evaluate", "--tracks", "short.jsonl", "--truth", "gt.jsonl"],
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn compare_reports() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    let a = r#"{"precision":1.0,"recall":1.0,"f1":1.0,"mota":1.0,"id_switches":0,"tp":10,"fp":0,"fn":0,"gt_count":10}"#;
    let b = r#"{"precision":1.0,"recall":0.9,"f1":0.9473684210526315,"mota":0.9,"id_switches":0,"tp":9,"fp":0,"fn":1,"gt_count":10}"#;
    std::fs::write(p.join("a.json"), a).unwrap();
    std::fs::write(p.join("b.json"), b).unwrap();
    let out = ok(p, &["compare", "a.json", "b.json"]);
    let c: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((c["delta"]["mota"].as_f64().unwrap() - 0.1).abs() < 1e-12);
}

#[test]
fn classify_zoom_pipeline() {
    let d = tempfile::tempdir().unwrap();
    simulate(d.path(), &["--kind", "zoom", "--seed", "5"]);
    ok(d.path(), &["track", "-i", "det.jsonl", "-o", "t.jsonl"]);
    let out = ok(d.path(), &["classify", "--tracks", "t.jsonl"]);
    let labels: Vec<Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(labels.len(), 1);
    assert_eq!(labels[0]["label"], "zoom");
}

#[test]
fn classify_skips_single_frame_tracks() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(
        d.path().join("t.jsonl"),
        "{\"frame\":0,\"tracks\":[{\"id\":4,\"x\":5.0,\"y\":5.0,\"w\":2.0,\"h\":2.0,\"status\":\"confirmed\"}]}\n",
    )
    .unwrap();
    let out = ok(d.path(), &["classify", "--tracks", "t.jsonl"]);
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("track 4"));
}

#[test]
fn mixed_scenario_labels_match_kinds() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    simulate(p, &["--kind", "mixed", "--seed", "2"]);
    ok(p, &["track", "-i", "det.jsonl", "-o", "t.jsonl"]);
    ok(
        p,
        &["classify", "--tracks", "t.jsonl", "-o", "labels.jsonl"],
    );

    // Pair each track with the ground-truth identity it first overlaps.
    let gt = lines(&p.join("gt.jsonl"));
    let tracks = lines(&p.join("t.jsonl"));
    let mut owner = std::collections::BTreeMap::new();
    for (g, t) in gt.iter().zip(&tracks) {
        for tr in t["tracks"].as_array().unwrap() {
            let (tx, ty) = (tr["x"].as_f64().unwrap(), tr["y"].as_f64().unwrap());
            let nearest = g["targets"]
                .as_array()
                .unwrap()
                .iter()
                .min_by(|a, b| {
                    let da = (a["x"].as_f64().unwrap() - tx).hypot(a["y"].as_f64().unwrap() - ty);
                    let db = (b["x"].as_f64().unwrap() - tx).hypot(b["y"].as_f64().unwrap() - ty);
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            owner
                .entry(tr["id"].as_u64().unwrap())
                .or_insert(nearest["gid"].as_u64().unwrap());
        }
    }
    let kinds: std::collections::BTreeMap<u64, String> = lines(&p.join("meta.jsonl"))
        .iter()
        .map(|m| {
            (
                m["gid"].as_u64().unwrap(),
                m["kind"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    let labels = lines(&p.join("labels.jsonl"));
    assert_eq!(labels.len(), 3);
    for l in labels {
        let gid = owner[&l["id"].as_u64().unwrap()];
        assert_eq!(l["label"].as_str().unwrap(), kinds[&gid]);
    }
}

#[test]
fn render_empty_and_stationary() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    std::fs::write(p.join("empty.jsonl"), "").unwrap();
    ok(p, &["render", "-i", "empty.jsonl", "-o", "empty.svg"]);
    let svg = std::fs::read_to_string(p.join("empty.svg")).unwrap();
    assert!(svg.contains("viewBox=\"0 0 1920 1080\""));
    assert!(svg.trim_end().ends_with("</svg>"));

    let still: Vec<String> = (0..10)
        .map(|f| format!("{{\"frame\":{f},\"tracks\":[{{\"id\":1,\"x\":50.0,\"y\":60.0,\"w\":20.0,\"h\":20.0,\"status\":\"confirmed\"}}]}}"))
        .collect();
    std::fs::write(p.join("still.jsonl"), still.join("\n")).unwrap();
    ok(p, &["render", "-i", "still.jsonl", "-o", "still.svg"]);
    let svg = std::fs::read_to_string(p.join("still.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 1);
    assert_eq!(svg.matches("<polyline").count(), 1);
}

#[test]
fn render_swipe_endpoints_match_features() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    simulate(p, &["--kind", "swipe", "--seed", "9"]);
    ok(p, &["track", "-i", "det.jsonl", "-o", "t.jsonl"]);
    ok(p, &["render", "-i", "t.jsonl", "-o", "t.svg"]);
    let labels: Vec<Value> = String::from_utf8(ok(p, &["classify", "--tracks", "t.jsonl"]).stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let net = labels[0]["features"]["net_displacement"].as_f64().unwrap();

    let svg = std::fs::read_to_string(p.join("t.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
    let points = svg
        .split("points=\"")
        .nth(1)
        .unwrap()
        .split('"')
        .next()
        .unwrap();
    let pts: Vec<(f64, f64)> = points
        .split(' ')
        .map(|xy| {
            let (x, y) = xy.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    let (a, b) = (pts[0], pts[pts.len() - 1]);
    assert!(((b.0 - a.0).hypot(b.1 - a.1) - net).abs() <= 1.0);
}

#[test]
fn render_ground_truth() {
    let d = tempfile::tempdir().unwrap();
    simulate(
        d.path(),
        &[
            "--kind",
            "fixation",
            "--n-targets",
            "3",
            "--duration",
            "100",
        ],
    );
    ok(d.path(), &["render", "-i", "gt.jsonl", "-o", "gt.svg"]);
    let svg = std::fs::read_to_string(d.path().join("gt.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
    assert!(svg.contains("<circle"));
}

#[test]
fn config_file_and_flag_precedence() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    std::fs::write(
        p.join("run.toml"),
        "[association]\nlambda = 0.8\n\n[tracker]\nn_init = 5\n",
    )
    .unwrap();
    let out = ok(
        p,
        &["--config", "run.toml", "--n-init", "2", "--print-config"],
    );
    let cfg: toml::Table = toml::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg["association"]["lambda"].as_float(), Some(0.8));
    assert_eq!(cfg["tracker"]["n_init"].as_integer(), Some(2));

    std::fs::write(p.join("bad.toml"), "[tracker]\nn_inti = 5\n").unwrap();
    let out = run(p, &["--config", "bad.toml", "--print-config"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn printed_config_round_trips() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    let first = ok(
        p,
        &[
            "--kind",
            "crossing",
            "--seed",
            "4",
            "--lambda",
            "1",
            "--print-config",
        ],
    )
    .stdout;
    std::fs::write(p.join("dump.toml"), &first).unwrap();
    let second = ok(p, &["--config", "dump.toml", "--print-config"]).stdout;
    assert_eq!(first, second);
}
