use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn case(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/cases").join(format!("{name}.dss"))
}

fn protsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_protsim")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_reports_ground_path() {
    let o = protsim(&["validate", case("ieee34").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("ground path: yes"));
    let o = protsim(&["validate", case("ieee37").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("ground path: no; SLG faults disabled"));
}

#[test]
fn validate_rejects_corrupted_file_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.dss");
    std::fs::write(&bad, "New Circuit.x bus1=s basekv=4.16\nNew Line.l1 bus1=s bus2=b length=abc\n").unwrap();
    let o = protsim(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2, column"));

    let dangling = dir.path().join("dangling.dss");
    std::fs::write(&dangling, "New Circuit.x bus1=s basekv=4.16\nNew Load.ld bus1=nowhere kw=10\n").unwrap();
    let o = protsim(&["validate", dangling.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn run_writes_identical_artifacts_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let net = case("ieee34");
    let go = |out: &str, workers: &str| {
        let out = dir.path().join(out);
        let o = protsim(&[
            "run", "--network", net.to_str().unwrap(), "--seed", "11", "--episodes", "40", "--workers", workers,
            "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = go("a", "1");
    let b = go("b", "4");
    for f in ["records.jsonl", "summary.csv", "report.txt"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let report = std::fs::read_to_string(a.join("report.txt")).unwrap();
    assert!(report.contains("False Positive") && report.contains("Success Rate"));
    assert_eq!(std::fs::read_to_string(a.join("records.jsonl")).unwrap().lines().count(), 40);
}

#[test]
fn run_with_trivial_agents() {
    let dir = tempfile::tempdir().unwrap();
    let net = case("ieee34");
    let out = dir.path().join("oracle");
    let o = protsim(&[
        "run", "--network", net.to_str().unwrap(), "--seed", "3", "--episodes", "50", "--agents", "oracle", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("100.00%"));
    let out = dir.path().join("hold");
    let o = protsim(&[
        "run", "--network", net.to_str().unwrap(), "--seed", "3", "--episodes", "50", "--agents", "hold",
        "--fault-prob", "1", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "hold,50,0,0,0,50,0,0.0000");
}

#[test]
fn input_errors_exit_with_one() {
    assert_eq!(protsim(&["run", "--seed", "1"]).status.code(), Some(1));
    let net = case("ieee34");
    assert_eq!(protsim(&["run", "--network", net.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(protsim(&["run", "--network", "/nonexistent.dss", "--seed", "1"]).status.code(), Some(1));
    let o = protsim(&["run", "--network", net.to_str().unwrap(), "--seed", "1", "--zf-range", "5,1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn manifest_drives_run() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("run.toml");
    std::fs::write(
        &m,
        format!(
            "network = \"{}\"\nseed = 5\nepisodes = 12\nout = \"results\"\n[faults]\nfault_probability = 1.0\n",
            case("ieee34").display()
        ),
    )
    .unwrap();
    let o = protsim(&["run", "--manifest", m.to_str().unwrap(), "--agents", "hold"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("results/summary.csv")).unwrap();
    assert!(csv.contains("hold,12,0,0,0,12,0,"));
}

#[test]
fn underreach_writes_map_and_dot() {
    let dir = tempfile::tempdir().unwrap();
    let o = protsim(&[
        "underreach", "--network", case("ieee34").to_str().unwrap(), "--seed", "2", "--scenarios", "1", "--kinds",
        "3p", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("underreach.csv")).unwrap();
    assert!(csv.starts_with("bus,tested,undetected,flag\n"));
    assert!(csv.contains(",detected_all") || csv.contains(",missed_some"));
    let dot = std::fs::read_to_string(dir.path().join("underreach.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
}

#[test]
fn dataset_export_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let o = protsim(&[
        "dataset", "--network", case("ieee34").to_str().unwrap(), "--seed", "4", "--episodes", "6", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("dataset.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6 * 2 * 60);
    let counts: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("dataset_counts.json")).unwrap()).unwrap();
    assert_eq!(counts["rows"], 720);
}

#[test]
fn serve_over_stdio() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_protsim"))
        .args(["serve", "--stdio", "--network", case("ieee34").to_str().unwrap(), "--seed", "1"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    writeln!(stdin, r#"{{"v":1,"cmd":"spec"}}"#).unwrap();
    writeln!(stdin, r#"{{"v":1,"cmd":"reset","seed":7}}"#).unwrap();
    writeln!(stdin, "garbage").unwrap();
    writeln!(stdin, r#"{{"v":1,"cmd":"step","actions":{{"relay_800":0,"relay_830":0}}}}"#).unwrap();
    writeln!(stdin, r#"{{"v":1,"cmd":"close"}}"#).unwrap();
    drop(stdin);
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let replies: Vec<serde_json::Value> =
        stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(replies.len(), 5);
    assert!(replies.iter().all(|r| r["v"] == 1));
    assert!(replies[1]["obs"]["relay_800"].is_object());
    assert_eq!(replies[2]["error"]["code"], "parse_error");
    assert_eq!(replies[3]["info"]["step"], 1);
}

#[test]
fn study_commands() {
    let net = case("ieee34");
    let o = protsim(&["fault-study", net.to_str().unwrap(), "--bus", "840", "--kind", "3p"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 2);
    let o = protsim(&["fault-study", net.to_str().unwrap(), "--bus", "nowhere"]);
    assert_eq!(o.status.code(), Some(1));
    let o = protsim(&["powerflow", net.to_str().unwrap()]);
    assert!(stdout(&o).starts_with("kind,element,phase"));
    let o = protsim(&["dot", net.to_str().unwrap()]);
    assert!(stdout(&o).contains("\"relay_830\"") || stdout(&o).contains("relay_830"));
    let o = protsim(&["canonical", net.to_str().unwrap()]);
    assert!(stdout(&o).contains("New Circuit.ieee34"));

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    let a = protsim(&["gen-profiles", "--hours", "24", "--seed", "9", "--out", p.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0));
    let first = std::fs::read(&p).unwrap();
    protsim(&["gen-profiles", "--hours", "24", "--seed", "9", "--out", p.to_str().unwrap()]);
    assert_eq!(first, std::fs::read(&p).unwrap());
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 25);
}
