use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn holoquant(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holoquant"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> String {
    let out = dir.join(name);
    let mut full: Vec<&str> = args.to_vec();
    let out_s = out.to_str().unwrap().to_owned();
    full.extend(["--output", &out_s]);
    let o = holoquant(&full);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    fs::read_to_string(out).unwrap()
}

fn cell(s: &str) -> (f64, f64) {
    let s = s.trim_matches('"');
    let (re, im) = s.split_once(',').unwrap();
    (re.parse().unwrap(), im.parse().unwrap())
}

/// Splits a CSV line on commas outside quotes.
fn fields(line: &str) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut quoted = false;
    for ch in line.chars() {
        match ch {
            '"' => quoted = !quoted,
            ',' if !quoted => out.push(String::new()),
            _ => out.last_mut().unwrap().push(ch),
        }
    }
    out
}

#[test]
fn gram_center_entry() {
    let dir = tempfile::tempdir().unwrap();
    for flags in [&["gram", "--truncation", "2"][..], &["gram", "--truncation", "2", "--normalized"][..]] {
        let text = run_to(dir.path(), "gram.csv", flags);
        let rows: Vec<Vec<String>> = text.lines().map(fields).collect();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.len() == 5));
        assert_eq!(cell(&rows[2][2]), (1.0, 0.0));
    }
    let text = run_to(dir.path(), "g.csv", &["gram", "--truncation", "2", "--normalized"]);
    let rows: Vec<Vec<String>> = text.lines().map(fields).collect();
    let (g01, _) = cell(&rows[2][3]);
    assert!((g01 - (-0.5f64).exp()).abs() < 1e-15);
}

#[test]
fn greens_sums_agree() {
    let dir = tempfile::tempdir().unwrap();
    let text = run_to(
        dir.path(),
        "g.csv",
        &["greens", "--theta0", "0.3", "--T-real", "1.0", "--epsilon", "0.05", "--points", "32"],
    );
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "theta,winding_re,winding_im,spectral_re,spectral_im,abs_difference"
    );
    let diffs: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(diffs.len(), 32);
    assert!(diffs.iter().all(|&d| d <= 1e-8), "{diffs:?}");
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["kernel", "--truncation", "3", "--points", "4"][..],
        &["evolve", "--truncation", "2", "--steps", "4"][..],
        &["heatkernel", "--points", "3", "--format", "json"][..],
        &["ladder", "--truncation", "3"][..],
    ] {
        let a = run_to(dir.path(), "a.out", args);
        let b = run_to(dir.path(), "b.out", args);
        assert_eq!(a, b, "{args:?}");
        assert!(!a.is_empty());
    }
}

#[test]
fn evolve_reads_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let init = dir.path().join("init.json");
    fs::write(&init, r#"{"N": 1, "coeffs": [[0, 0], [1, 0], [0, 0]]}"#).unwrap();
    let text = run_to(
        dir.path(),
        "e.csv",
        &["evolve", "--truncation", "1", "--steps", "2", "--t", "0.5", "--initial", init.to_str().unwrap()],
    );
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,time,norm,exact_error,c[-1],c[0],c[1]");
    assert_eq!(lines.len(), 4);
    // h_0 = 0: the constant function does not move.
    let last = fields(lines[3]);
    assert_eq!(last[1], "0.5");
    assert!((cell(&last[5]).0 - 1.0).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    assert_eq!(holoquant(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(holoquant(&["gram", "--truncation", "x"]).status.code(), Some(2));
    assert_eq!(holoquant(&["--help"]).status.code(), Some(0));
    // raw basis beyond N = 6 is numerically dependent
    assert_eq!(holoquant(&["gram", "--truncation", "8"]).status.code(), Some(1));
    assert_eq!(holoquant(&["gram", "--quad-order", "0"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let init = dir.path().join("bad.json");
    fs::write(&init, r#"{"N": 2, "coeffs": [[0, 0]]}"#).unwrap();
    let o = holoquant(&["evolve", "--truncation", "2", "--initial", init.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_defaults_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"truncation": 1, "format": "json"}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let json = run_to(dir.path(), "a.json", &["gram", "--normalized", "--config", c]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["labels"], serde_json::json!([-1, 0, 1]));
    let csv = run_to(dir.path(), "b.csv", &["gram", "--normalized", "--config", c, "--truncation", "2", "--format", "csv"]);
    assert_eq!(csv.lines().count(), 5);
    fs::write(&cfg, r#"{"truncaton": 1}"#).unwrap();
    assert_eq!(holoquant(&["gram", "--config", c]).status.code(), Some(1));
}
