use std::process::{Command, Output};

use serde_json::Value;

fn zerocheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zerocheck"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("valid JSON on stdout")
}

#[test]
fn exit_codes_follow_the_verdict() {
    assert_eq!(zerocheck(&["check", "2^x", "e^(x*log(2))"]).status.code(), Some(0));
    assert_eq!(zerocheck(&["check", "sin(x)^2", "1-cos(x)^2"]).status.code(), Some(0));
    assert_eq!(zerocheck(&["check", "sin(x)", "-sin(x)"]).status.code(), Some(1));
    // undefined on the whole placement range
    let out = zerocheck(&["check", "log(-1-x^2)", "log(-2-x^2)"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("verdict: inconclusive"));
}

#[test]
fn usage_and_parse_errors() {
    assert_eq!(zerocheck(&["bogus"]).status.code(), Some(64));
    assert_eq!(zerocheck(&["check", "x", "x", "--range", "5:1"]).status.code(), Some(64));
    assert_eq!(
        zerocheck(&["check", "sin(x)^2", "1-cos(x)^2", "--points", "0"]).status.code(),
        Some(64)
    );
    let out = zerocheck(&["check", "sin(", "x"]);
    assert_eq!(out.status.code(), Some(65));
    assert!(String::from_utf8_lossy(&out.stderr).contains("offset 4"));
    assert_eq!(zerocheck(&["check", "y", "x"]).status.code(), Some(65));
    assert_eq!(zerocheck(&["check", "t^2", "t*t", "--var", "t"]).status.code(), Some(0));
}

#[test]
fn json_report_schema() {
    let out = zerocheck(&["check", "sin(x)", "-sin(x)", "--json", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(1));
    let doc = json(&out);
    for key in [
        "schema_version",
        "verdict",
        "stage",
        "symbolic_verdict",
        "segments",
        "witness",
        "error_bound",
        "log_error_bound",
        "assumed_k",
        "seed",
    ] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["verdict"], "incorrect");
    assert_eq!(doc["stage"], "pointwise");
    assert_eq!(doc["seed"], 7);
    let seg = &doc["segments"][0];
    for key in ["a", "b", "M", "points_tested", "resampled", "outcome"] {
        assert!(seg.get(key).is_some(), "segment missing {key}");
    }
    let w = &doc["witness"];
    assert!(w["fx"].as_f64().unwrap().abs() > 1e-9, "{w}");

    // same seed, same document
    let again = zerocheck(&["check", "sin(x)", "-sin(x)", "--json", "--seed", "7"]);
    assert_eq!(json(&again), doc);
}

#[test]
fn bounded_report_over_explicit_segments() {
    let out = zerocheck(&[
        "check",
        "sin(x)^2",
        "1-cos(x)^2",
        "--segment",
        "10:20",
        "--segment",
        "-20:-10",
        "--points",
        "10",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["verdict"], "correct_with_bound");
    let segments = doc["segments"].as_array().unwrap();
    assert_eq!(segments.len(), 2);
    assert!(segments.iter().all(|s| s["points_tested"] == 10 && s["outcome"] == "passed"));
    // two segments of 2^52-ish points, k = 1e6, m = 10: about 2 * e^-222
    let log_bound = doc["log_error_bound"].as_f64().unwrap();
    assert!((-222.0..-220.0).contains(&log_bound), "{log_bound}");
}

#[test]
fn table1_is_exact() {
    let out = zerocheck(&["table1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "a,b,M");
    assert_eq!(lines.len(), 10);
    assert_eq!(lines[1], "10,15,3002399751580330");
    assert_eq!(lines[3], "1000,1005,44811936590751");
    assert_eq!(lines[9], "1000000000,1000000005,45035996");
}

#[test]
fn grid_sizes() {
    let out = zerocheck(&["grid", "--a", "1000000000", "--b", "1000000001"]);
    assert!(stdout(&out).contains("M = 9007199"), "{}", stdout(&out));
    // negative segments are mirrored
    let out = zerocheck(&["grid", "--a", "-1005", "--b", "-1000"]);
    assert!(stdout(&out).contains("M = 44811936590751"));
    assert_eq!(zerocheck(&["grid", "--a", "2", "--b", "1"]).status.code(), Some(64));
}

#[test]
fn prob_values() {
    let out = zerocheck(&["prob", "--M", "10", "--m", "2", "--k", "5", "--json", "--exact"]);
    let doc = json(&out);
    assert_eq!(doc["result"]["exact"], "2/9");
    assert_eq!(doc["params"]["grid_points"], 10);
    let out = zerocheck(&["prob", "--M", "10", "--m", "3", "--k", "2"]);
    assert_eq!(stdout(&out).trim(), "P_err = 0");
    let out = zerocheck(&["prob", "--M", "4503599627370496", "--m", "10", "--k", "1000000", "--log"]);
    assert!(stdout(&out).contains("-222.28"), "{}", stdout(&out));
}

#[test]
fn simulate_reports_z_score() {
    let out = zerocheck(&["simulate", "--M", "100", "--m", "2", "--k", "30", "--trials", "20000", "--seed", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let z: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("z = "))
        .expect("z line")
        .parse()
        .unwrap();
    assert!(z.abs() < 4.0, "{text}");
    assert_eq!(stdout(&zerocheck(&["simulate", "--M", "100", "--m", "2", "--k", "30", "--trials", "20000", "--seed", "3"])), text);
}

#[test]
fn curves_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curves.csv");
    let out = zerocheck(&[
        "curves",
        "--m-list",
        "10,20,30",
        "--k-from",
        "1000",
        "--k-to",
        "1000000000",
        "--steps",
        "7",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let rows: Vec<(u64, u64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(text.lines().next(), Some("m,k,log_p"));
    assert_eq!(rows.len(), 21);
    for pair in rows.windows(2).filter(|w| w[0].0 == w[1].0) {
        assert!(pair[0].1 < pair[1].1 && pair[0].2 < pair[1].2, "{pair:?}");
    }
    for i in 0..7 {
        assert!(rows[i].2 > rows[i + 7].2 && rows[i + 7].2 > rows[i + 14].2);
    }
}
