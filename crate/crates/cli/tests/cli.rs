use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

fn corand(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corand")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = corand(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn data_csv(n: usize) -> String {
    let mut s = String::from("a,b,c,kind\n");
    for i in 0..n {
        let t = i as f64;
        writeln!(s, "{},{},{},{}", (t * 0.3).sin(), (t * 0.3).sin() + 0.1 * (t * 1.7).cos(), (t * 0.9).cos(), if i % 3 == 0 { "x" } else { "y" }).unwrap();
    }
    s
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn toy_writes_table_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let text = ok(&["toy", "--seed", "2", "--out", out]);
    assert!(text.contains("weight on A,B"));
    let csv = std::fs::read_to_string(dir.path().join("toy.csv")).unwrap();
    assert!(csv.starts_with("scenario,A,B,C,D,gain\n"));
    assert_eq!(csv.lines().count(), 3);
    let meta = read_json(&dir.path().join("toy.json"));
    assert_eq!(meta["seed"], 2);
    assert!(meta["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(meta["results"]["second_ab_mass"].as_f64().unwrap() >= 0.8);
}

#[test]
fn gains_with_partial_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"pairs": 2, "n": 200, "m": 16}"#);
    let out = dir.path().join("out");
    ok(&["gains", "--config", &cfg, "--seed", "5", "--out", out.to_str().unwrap()]);
    let csv = std::fs::read_to_string(out.join("gains.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "direction,H[E,none],H[E,t]");
    assert_eq!(lines.len(), 4);
    let meta = read_json(&out.join("gains.json"));
    assert_eq!(meta["config"]["seed"], 5);
    assert_eq!(meta["config"]["n"], 200);
    assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn stability_and_timing_small_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"n": 100, "noise_sigmas": [0, 1], "row_removals": [0, 10], "replicates": 2}"#,
    );
    let out = dir.path().to_str().unwrap();
    let table = ok(&["stability", "--config", &cfg, "--out", out]);
    assert!(table.contains("dn=10"));
    let csv = std::fs::read_to_string(dir.path().join("stability.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("0,0,"));

    let cfg = write(dir.path(), "t.json", r#"{"sizes": [[200, 10], [400, 10]], "replicates": 1}"#);
    ok(&["timing", "--config", &cfg, "--out", out]);
    let csv = std::fs::read_to_string(dir.path().join("timing.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    let bad = write(dir.path(), "bad.json", r#"{"replicates": 0}"#);
    assert!(!corand(&["stability", "--config", &bad]).status.success());
}

#[test]
fn sample_keeps_tile_rows_together() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", &data_csv(12));
    let tiling = write(dir.path(), "t.json", r#"[{"rows": [0, 1, 2, 3, 4, 5], "cols": [0, 1]}]"#);
    let out = dir.path().join("samples");
    ok(&["sample", "--data", &data, "--tiling", &tiling, "--seed", "4", "--count", "3", "--out", out.to_str().unwrap()]);
    let original: Vec<Vec<String>> = data_csv(12).lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    for k in 1..=3 {
        let text = std::fs::read_to_string(out.join(format!("sample-{k:03}.csv"))).unwrap();
        let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
        assert_eq!(rows.len(), 12);
        for row in &rows[..6] {
            // the (a, b) pair of a tiled row comes from one original tiled row
            assert!(original[..6].iter().any(|o| o[0].parse::<f64>().unwrap() == row[0].parse::<f64>().unwrap()
                && o[1].parse::<f64>().unwrap() == row[1].parse::<f64>().unwrap()));
        }
    }
}

#[test]
fn covariance_and_view() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", &data_csv(30));
    let tiling = write(dir.path(), "t.json", r#"[{"rows": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9], "cols": [0, 1, 2]}]"#);
    let text = ok(&["cov", "--data", &data, "--tiling", &tiling, "--montecarlo", "2000"]);
    let blocks: Vec<&str> = text.split("\n\n").collect();
    assert_eq!(blocks.len(), 2);
    let header = blocks[0].lines().next().unwrap();
    assert_eq!(header, ",a,b,c,kind=x,kind=y");

    let hyp = write(dir.path(), "h.json", r#"{"partition": [[0, 1], [2]]}"#);
    let tiles = write(dir.path(), "k.json", r#"[{"rows": [0, 1, 2], "cols": [0, 2]}]"#);
    let coords = dir.path().join("view/coords.csv");
    let text = ok(&["view", "--data", &data, "--hypothesis", &hyp, "--tiles", &tiles, "--out", coords.to_str().unwrap()]);
    assert!(text.starts_with("gains "));
    let csv = std::fs::read_to_string(&coords).unwrap();
    assert_eq!(csv.lines().count(), 31);
    let meta = read_json(&coords.with_extension("json"));
    let gains = meta["gains"].as_array().unwrap();
    assert!(gains[0].as_f64().unwrap() >= gains[1].as_f64().unwrap());
    assert_eq!(meta["directions"][0].as_array().unwrap().len(), 5);

    let wrong = write(dir.path(), "w.json", r#"{"n": 4, "m": 2, "tiles": []}"#);
    let out = corand(&["cov", "--data", &data, "--tiling", &wrong]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("4x2"));
}

#[test]
fn serve_answers_health_checks() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_corand"))
        .args(["serve"])
        .env("CORAND_PORT", port.to_string())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let mut reply = String::new();
    while Instant::now() < deadline {
        if let Ok(mut s) = std::net::TcpStream::connect(("127.0.0.1", port)) {
            s.write_all(b"GET /health HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
            s.read_to_string(&mut reply).unwrap();
            break;
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.ends_with("ok"));
}
