use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_invalloc"))
}

#[test]
fn table_matches_golden() {
    let out = bin()
        .args(["table", "--N", "3", "--theta", "1..60"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, include_str!("golden/table_n3_theta1-60.csv"));
    let again = bin()
        .args(["table", "--N", "3", "--theta", "1..60"])
        .output()
        .unwrap();
    assert_eq!(again.stdout, text.as_bytes());
    assert!(!text.contains('\r'));
}

#[test]
fn gen_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    let status = bin()
        .args([
            "gen", "random", "--seed", "3", "--N", "2", "--T", "4", "--theta", "5", "--out",
        ])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    for alg in ["anp", "pd_threshold"] {
        let out = bin()
            .arg("run")
            .arg(&path)
            .args(["--algorithm", alg])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["holds"], serde_json::Value::Bool(true));
    }
    let out = bin()
        .arg("run")
        .arg(&path)
        .args(["--algorithm", "cr_pursuit"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_csv_and_staircase() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stair.json");
    let status = bin()
        .args(["gen", "staircase", "--theta", "7.389", "--T", "5", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let out = bin()
        .arg("run")
        .arg(&path)
        .args(["--algorithm", "cr_pursuit", "--format", "csv"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("instance,hash,algorithm"));
    assert!(lines.next().unwrap().contains(",cr_pursuit,"));
}

#[test]
fn small_suite_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.json");
    std::fs::write(
        &cfg,
        r#"{"seed": 9, "generators": [{"kind": "random", "count": 3, "inventories": [1, 2], "horizons": [3], "thetas": [3.0], "class": "gradient_bounded"}]}"#,
    )
    .unwrap();
    let out_path = dir.path().join("report.csv");
    let out = bin()
        .arg("suite")
        .arg(&cfg)
        .args([
            "--jobs",
            "2",
            "--grid-step",
            "0.1",
            "--format",
            "csv",
            "--out",
        ])
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 + 2 + 3);
}

#[test]
fn empty_suite_succeeds_and_bad_input_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.json");
    std::fs::write(&cfg, "{}").unwrap();
    let out = bin().arg("suite").arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let out = bin().args(["table", "--theta", "0.5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .args(["gen", "staircase", "--theta", "2", "--layout", "zigzag"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
