use std::fs;
use std::process::Command;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_renyi-portfolio"))
}

#[test]
fn verify_succeeds_with_exit_zero() {
    let out = cli().args(["verify", "--instances", "4"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("[PASS]")));
}

#[test]
fn corrupted_verify_exits_two() {
    let out = cli()
        .args(["verify", "--instances", "3", "--corrupt-covering"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(
        cli().arg("nonsense").output().unwrap().status.code(),
        Some(1)
    );
    assert_eq!(
        cli()
            .args(["bench", "--rho", "2.5"])
            .output()
            .unwrap()
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        cli()
            .args(["solve", "--method", "newton"])
            .output()
            .unwrap()
            .status
            .code(),
        Some(1)
    );
    assert_eq!(cli().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn missing_instance_file_exits_three() {
    let out = cli()
        .args(["solve", "/definitely/not/here.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn solve_reads_an_instance_file() {
    let dir = tempfile::tempdir().unwrap();
    let instance = dir.path().join("market.json");
    fs::write(
        &instance,
        r#"{"k": 2, "m": 2, "payoff": [[2.0, 0.5], [0.5, 2.0]], "probs": [0.6, 0.4]}"#,
    )
    .unwrap();
    let trace = dir.path().join("trace.csv");
    let out = cli()
        .args([
            "solve",
            instance.to_str().unwrap(),
            "--rho",
            "1",
            "--method",
            "cover",
        ])
        .args(["--max-iters", "500", "--out", trace.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(trace).unwrap();
    let last: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    assert_eq!(last[0], "cover");
    assert!(last[4].parse::<f64>().unwrap().abs() < 1e-9);
}

#[test]
fn bench_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli()
        .args([
            "bench",
            "--k",
            "12",
            "--m",
            "4",
            "--seed",
            "5",
            "--max-iters",
            "200",
        ])
        .args([
            "--rho",
            "0.5,1.5",
            "--method",
            "info_proj_eg,cover",
            "--plot-script",
        ])
        .args(["--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "trace_rho_0.5.csv",
        "trace_rho_1.5.csv",
        "summary.csv",
        "plot_traces.py",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
}
