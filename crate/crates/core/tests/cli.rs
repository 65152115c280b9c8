use std::process::Command;

fn ksdrift() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ksdrift"));
    cmd.env("RUST_LOG", "error");
    cmd
}

#[test]
fn run_writes_the_three_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = dir.path().join("sub.cfg");
    std::fs::write(
        &config,
        format!(
            "# short subcritical run\nregime = physical\nM = 0.5\ninitial = exponential 0.5\nL = 60\nN = 600\nT_final = 0.2\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let status = ksdrift().arg("run").arg(&config).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["label"], "sub");
    assert_eq!(summary["completed"], true);
    let ts = std::fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert!(ts.starts_with("t,mass,J,moment2,b,entropy,fisher,trace_residual,H,lyapunov,mu,m\n"));
    let profile = std::fs::read_to_string(out.join("final_profile.csv")).unwrap();
    assert!(profile.starts_with("x,n\n"));
    assert_eq!(profile.lines().count(), 601);
}

#[test]
fn preset_honours_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("super");
    let result = ksdrift().args(["preset", "supercritical", "--out"]).arg(&out).output().unwrap();
    assert!(result.status.success());
    let stdout = String::from_utf8(result.stdout).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(summary["blowup_detected"], true);
    assert!(out.join("summary.json").exists());
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("typo.cfg");
    std::fs::write(&config, "regime = physical\nM = 1\nT_fnal = 3\n").unwrap();
    let result = ksdrift().arg("run").arg(&config).output().unwrap();
    assert!(!result.status.success());
    assert!(String::from_utf8_lossy(&result.stderr).contains("unknown key `T_fnal`"));
    let result = ksdrift().args(["preset", "nope"]).output().unwrap();
    assert!(!result.status.success());
}

#[test]
fn sweep_reports_one_row_per_mass() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let result = ksdrift()
        .args(["sweep-mass", "0.8", "1.4", "3", "--cells", "1000", "--t-final", "5", "--out"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(result.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "M,verdict,detection_time,blowup_time_bound,final_time,final_b");
    assert!(rows[1].starts_with("0.8,not_detected"));
    assert!(rows[3].starts_with("1.4,boundary_exceeded_threshold"));
}
