use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn pieeg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pieeg"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_writes_expected_frame_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.rec");
    let v = ok_json(&pieeg(&[
        "simulate",
        "--scenario",
        p(&scenario("alpha.scn")),
        "--duration",
        "10",
        "--sps",
        "250",
        "--out",
        p(&out),
    ]));
    assert_eq!(v["frames"], 2500);
    assert_eq!(std::fs::metadata(&out).unwrap().len(), 64 + 2500 * 27);
}

#[test]
fn analyze_finds_blinks_and_writes_band_power() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("blink10.rec");
    let csv = dir.path().join("bp.csv");
    ok_json(&pieeg(&[
        "simulate",
        "--scenario",
        p(&scenario("blink10.scn")),
        "--out",
        p(&rec),
    ]));
    let report = ok_json(&pieeg(&[
        "analyze",
        "--in",
        p(&rec),
        "--detect",
        "blink",
        "--csv",
        p(&csv),
    ]));
    let events = report["events"].as_array().unwrap();
    assert!(events.len() >= 9, "{events:?}");
    assert!(events.iter().all(|e| e["kind"] == "blink"));
    assert_eq!(report["band_power"].as_array().unwrap().len(), 8);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().count(), 9);
    assert!(table.starts_with("channel,label,delta_uV2"));
}

#[test]
fn analyze_and_replay_agree() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("blink10.rec");
    ok_json(&pieeg(&[
        "simulate",
        "--scenario",
        p(&scenario("blink10.scn")),
        "--out",
        p(&rec),
    ]));
    let report = ok_json(&pieeg(&["analyze", "--in", p(&rec), "--detect", "blink"]));
    let out = pieeg(&["replay", "--in", p(&rec), "--detect", "blink"]);
    assert!(out.status.success());
    let replayed: Vec<Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let analyzed = report["events"].as_array().unwrap();
    assert_eq!(replayed.len(), analyzed.len());
    // causal vs zero-phase filtering: within one 250-sample block
    for (a, b) in analyzed.iter().zip(&replayed) {
        let ca = (a["t_start"].as_f64().unwrap() + a["t_end"].as_f64().unwrap()) / 2.0;
        let cb = (b["t_start"].as_f64().unwrap() + b["t_end"].as_f64().unwrap()) / 2.0;
        assert!((ca - cb).abs() <= 1.0, "{a} vs {b}");
    }
}

#[test]
fn export_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("c.rec");
    let csv = dir.path().join("c.csv");
    ok_json(&pieeg(&[
        "simulate",
        "--scenario",
        p(&scenario("chew.scn")),
        "--duration",
        "2",
        "--out",
        p(&rec),
    ]));
    let v = ok_json(&pieeg(&["export", "--in", p(&rec), "--csv", p(&csv)]));
    assert_eq!(v["rows"], 500);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 501);
    let out = pieeg(&["export", "--in", p(&rec), "--csv", "-"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 501);
}

#[test]
fn errors_exit_one_with_clean_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec![
            "simulate".into(),
            "--sps".into(),
            "300".into(),
            "--out".into(),
            p(&dir.path().join("x.rec")).into(),
        ],
        vec![
            "export".into(),
            "--in".into(),
            "/nonexistent.rec".into(),
            "--csv".into(),
            "-".into(),
        ],
        vec![
            "analyze".into(),
            "--in".into(),
            p(&scenario("alpha.scn")).into(),
        ],
        vec![
            "analyze".into(),
            "--in".into(),
            "x".into(),
            "--detect".into(),
            "sneeze".into(),
        ],
        vec!["frobnicate".into()],
    ];
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = pieeg(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let out = pieeg(&[
        "simulate",
        "--sps",
        "300",
        "--out",
        p(&dir.path().join("x.rec")),
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("300 not in {250,"));
}

#[test]
fn serve_honours_port_variable() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_pieeg"))
        .arg("serve")
        .env("PIEEG_PORT", port.to_string())
        .env("RUST_LOG", "warn")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(10);
    let mut body = String::new();
    while Instant::now() < deadline {
        if let Ok(mut s) = std::net::TcpStream::connect(("127.0.0.1", port)) {
            use std::io::{Read, Write};
            s.write_all(b"GET /health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n")
                .unwrap();
            s.read_to_string(&mut body).unwrap();
            break;
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(body.starts_with("HTTP/1.1 200"), "{body}");
    assert!(body.contains("\"status\":\"ok\""));
}
