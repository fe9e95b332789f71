use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qcs(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcs"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("qcs binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_line(out: &Output) -> String {
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = err.lines().filter(|l| l.starts_with("error[")).collect();
    assert_eq!(lines.len(), 1, "stderr: {err}");
    lines[0].to_string()
}

#[test]
fn gen_capture_and_recover_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.json", "b.json"] {
        stdout(&qcs(
            &[
                "gen-capture",
                "--out",
                name,
                "--k",
                "3",
                "--meas",
                "2048",
                "--seed",
                "12",
            ],
            dir.path(),
        ));
    }
    assert_eq!(
        fs::read(dir.path().join("a.iq")).unwrap(),
        fs::read(dir.path().join("b.iq")).unwrap()
    );
    let a = stdout(&qcs(
        &["recover", "--capture", "a.json", "--sparsity", "3"],
        dir.path(),
    ));
    let b = stdout(&qcs(
        &["recover", "--capture", "b.json", "--sparsity", "3"],
        dir.path(),
    ));
    assert_eq!(a, b);
    let report: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(report["targets"].as_array().unwrap().len(), 3);
    assert!(report["targets"][0]["range_m"].as_f64().unwrap() > 0.0);
}

#[test]
fn recover_writes_report_file() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&qcs(
        &[
            "gen-capture",
            "--out",
            "s.json",
            "--record-dither",
            "--inline-omega",
        ],
        dir.path(),
    ));
    stdout(&qcs(
        &[
            "recover",
            "--capture",
            "s.json",
            "--sparsity",
            "2",
            "--algo",
            "pbp",
            "--out",
            "r.json",
        ],
        dir.path(),
    ));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["algorithm"], "pbp");
    assert_eq!(report["stop_reason"], "single_pass");
}

#[test]
fn ambiguity_reports_collision() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "ambiguity",
        "--n",
        "256",
        "--n0",
        "64",
        "--n1",
        "10",
        "--psi0",
        "0.7854",
        "--gamma",
        "0.5",
        "--meas",
        "1024",
        "--seeds",
        "200",
    ];
    let text = stdout(&qcs(&args, dir.path()));
    assert_eq!(text, stdout(&qcs(&args, dir.path())));
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["condition_holds"], true);
    assert_eq!(report["undithered_AC"], true);
    assert!(report["dithered_AC_rate"].as_f64().unwrap() < 0.05);
    assert_eq!(report["n_seeds"], 200);
}

#[test]
fn simulate_writes_identical_csv_for_equal_seeds() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("grid.json"),
        r#"{"sparsities": [2], "bitrates": [256, 512], "dithered": [false, true], "algorithm": ["pbp", "qiht"]}"#,
    )
    .unwrap();
    for out in ["x.csv", "y.csv"] {
        stdout(&qcs(
            &[
                "simulate",
                "--config",
                "grid.json",
                "--out",
                out,
                "--trials",
                "30",
                "--seed",
                "4",
            ],
            dir.path(),
        ));
    }
    let x = fs::read_to_string(dir.path().join("x.csv")).unwrap();
    assert_eq!(x, fs::read_to_string(dir.path().join("y.csv")).unwrap());
    assert_eq!(x.lines().count(), 1 + 8);
    assert!(x.starts_with("K,b,log2_bitrate,M,dithered,algorithm,trials,"));
}

#[test]
fn errors_are_single_prefixed_lines() {
    let dir = tempfile::tempdir().unwrap();
    let line = error_line(&qcs(
        &["recover", "--capture", "missing.json", "--sparsity", "2"],
        dir.path(),
    ));
    assert!(line.starts_with("error[io]: "), "{line}");

    fs::write(
        dir.path().join("bad.json"),
        r#"{"sparsities": [2], "bit_depths": [3], "bitrates": [10]}"#,
    )
    .unwrap();
    let line = error_line(&qcs(
        &["simulate", "--config", "bad.json", "--out", "o.csv"],
        dir.path(),
    ));
    assert!(line.starts_with("error[config]: "), "{line}");

    fs::write(dir.path().join("typo.json"), r#"{"sparsity": [2]}"#).unwrap();
    let line = error_line(&qcs(
        &["simulate", "--config", "typo.json", "--out", "o.csv"],
        dir.path(),
    ));
    assert!(
        line.starts_with("error[config]: ") || line.starts_with("error[json]: "),
        "{line}"
    );

    let line = error_line(&qcs(&["ambiguity", "--gamma", "1.5"], dir.path()));
    assert!(line.starts_with("error[invalid-parameter]: "), "{line}");
}
