use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graph_nls::cli::git_blob_sha1;

fn graph(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("graphs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graph-nls")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_soliton_grid_passes() {
    let o = run(&["verify-soliton", "--p", "2.5", "3", "4", "5", "--mu", "1", "2", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    // header, 12 rows, summary
    assert_eq!(text.lines().count(), 14);
    assert!(text.contains("-0.0104166666667"));
}

#[test]
fn verify_soliton_spot_value() {
    let o = run(&["verify-soliton", "--p", "4", "--mu", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0.0625"));
}

#[test]
fn exponent_out_of_range_is_usage_error() {
    let o = run(&["verify-soliton", "--p", "7", "--mu", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("(2, 6)"));
    assert_eq!(run(&["solve"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn malformed_graph_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"vertices": ["a"], "edges": []}"#).unwrap();
    let o = run(&["solve", bad.to_str().unwrap(), "--mu", "40"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn thresholds_increase_with_k() {
    let o = run(&["thresholds", graph("dumbbell.json").to_str().unwrap(), "--k", "1", "2", "3", "--p", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mus: Vec<f64> = text.lines().skip(1).map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(mus.len(), 3);
    assert!(mus[0] < mus[1] && mus[1] < mus[2]);
    assert!(text.lines().nth(1).unwrap().ends_with("e1"));
}

#[test]
fn multi_edge_placement_moves_slots() {
    let net = graph("network19.json");
    let a = stdout(&run(&["thresholds", net.to_str().unwrap(), "--k", "3"]));
    let b = stdout(&run(&["thresholds", net.to_str().unwrap(), "--k", "3", "--placement", "multi-edge"]));
    let edges = |t: &str| t.lines().nth(1).unwrap().split_whitespace().skip(3).map(String::from).collect::<Vec<_>>();
    assert_eq!(edges(&a), vec!["e19"; 3]);
    let spread = edges(&b);
    assert_eq!(spread.len(), 3);
    assert!(spread.iter().any(|e| e != "e19"));
}

#[test]
fn ps_demo_tables() {
    let o = run(&["ps-demo", "--c", "1", "--mu", "2", "--n", "4", "16", "64"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("sine sequence") && text.contains("dilation sequence"));
    let sine: Vec<Vec<f64>> = text
        .lines()
        .skip(2)
        .take(3)
        .map(|l| l.split_whitespace().map(|c| c.parse().unwrap()).collect())
        .collect();
    assert!(sine.iter().all(|r| r[1] == 1.0));
    assert!(sine[0][3] > sine[1][3] && sine[1][3] > sine[2][3]);

    let zero = stdout(&run(&["ps-demo", "--c", "0", "--mu", "2", "--n", "1"]));
    assert!(!zero.contains("sine"));
    // title, header, one row
    assert_eq!(zero.lines().count(), 3);
}

#[test]
fn solve_writes_stable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let g = graph("dumbbell.json");
    let args = |out: &Path| {
        vec![
            "solve".to_string(),
            g.to_str().unwrap().to_string(),
            "--mu".into(),
            "40".into(),
            "--k".into(),
            "1".into(),
            "--p".into(),
            "4".into(),
            "--h".into(),
            "0.005".into(),
            "--out".into(),
            out.to_str().unwrap().to_string(),
        ]
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let oa = Command::new(env!("CARGO_BIN_EXE_graph-nls")).args(args(&a)).output().unwrap();
    assert_eq!(oa.status.code(), Some(0), "{}", stderr(&oa));
    let mut bargs = args(&b);
    bargs.extend(["--jobs".into(), "2".into()]);
    let ob = Command::new(env!("CARGO_BIN_EXE_graph-nls")).args(bargs).output().unwrap();
    assert_eq!(ob.status.code(), Some(0));

    for f in ["report.json", "manifest.json", "state_1.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    assert!(a.join("timing.json").exists());

    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    let state = &report["outcomes"]["states"][0];
    assert!(state["energy"]["total"].as_f64().unwrap() < 0.0);
    assert!(state["lambda"].as_f64().unwrap() > 0.0);
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));

    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["graph_sha1"], git_blob_sha1(&std::fs::read(&g).unwrap()));
    let csv = std::fs::read_to_string(a.join("state_1.csv")).unwrap();
    assert!(csv.lines().count() > 100);
}

#[test]
fn small_mass_needs_force() {
    let g = graph("dumbbell.json");
    let o = run(&["solve", g.to_str().unwrap(), "--mu", "0.01", "--k", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("below the threshold"));

    let o = run(&["solve", g.to_str().unwrap(), "--mu", "0.01", "--k", "1", "--h", "0.1", "--force", "--max-iterations", "200"]);
    assert!(stderr(&o).contains("warning"));
    assert_ne!(o.status.code(), Some(2));
}

#[test]
fn three_levels_reported() {
    let g = graph("dumbbell.json");
    let mu3 = stdout(&run(&["thresholds", g.to_str().unwrap(), "--k", "3"]))
        .lines()
        .nth(1)
        .unwrap()
        .split_whitespace()
        .nth(1)
        .unwrap()
        .parse::<f64>()
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mu = format!("{}", 1.1 * mu3);
    let o = run(&[
        "solve",
        g.to_str().unwrap(),
        "--mu",
        &mu,
        "--k",
        "3",
        "--h",
        "0.005",
        "--theta-samples",
        "2",
        "--allow-unconverged",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_ne!(o.status.code(), Some(2), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["outcomes"]["levels"].as_array().unwrap().len(), 3);
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("level ")).count(), 3);
}
