use std::path::Path;
use std::process::{Command, Output};

fn drfsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drfsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        "[scenario]\nnode_count = 20\nflows = 2\nspeed = 10.0\nduration = 5.0\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_summary_and_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = drfsim(&["run", "--config", &cfg, "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert!(lines.next().unwrap().starts_with("scenario_id,protocol,threshold_pct,"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("drf_t25_v10_f2,drf,25.0,10.0,2,9,5.0,"), "{row}");
    assert!(!out.join("events.csv").exists());

    // the echoed config reproduces the row
    let again = dir.path().join("again");
    let echo = out.join("config.toml");
    let o = drfsim(&["run", "--config", echo.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(again.join("summary.csv")).unwrap(), summary);
}

#[test]
fn run_with_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = drfsim(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--traces"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["events.csv", "rates.csv", "feedback.csv", "energy.csv", "mobility.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn sweep_over_protocols() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("sweep");
    let o = drfsim(&[
        "sweep",
        "--config",
        &cfg,
        "--axis",
        "protocol",
        "--replications",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("atp_") && rows[1].starts_with("atp_"));
    assert!(rows[2].starts_with("drf_") && rows[3].starts_with("drf_"));
}

#[test]
fn unknown_axis_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = drfsim(&["sweep", "--config", &cfg, "--axis", "colour"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown axis"));
}

#[test]
fn invalid_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[scenario]\nduration = -1.0\n").unwrap();
    let o = drfsim(&["run", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("scenario.duration"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[scenario]\nspeeed = 3.0\n").unwrap();
    let o = drfsim(&["run", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("speeed"), "{}", stderr(&o));
}

#[test]
fn missing_config_fails() {
    let o = drfsim(&["run", "--config", "/nonexistent/drfsim.toml"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn paper_suite_rejects_zero_replications() {
    let dir = tempfile::tempdir().unwrap();
    let o = drfsim(&["paper-suite", "--out", dir.path().to_str().unwrap(), "--replications", "0"]);
    assert!(!o.status.success());
}
