use std::path::Path;
use std::process::{Command, Output};

const SCENARIO: &str = r#"
name = "cli-short"
mode = "mpc"
duration_days = 6.0
output_dir = "results"

[initial_state]
G = 100.0
I = 10.0
beta = 300.0
S_I = 0.72
V_l = 0.0

[controller]
horizon_periods = 3
period_days = 2.0
lambda = 60.0
u_eq_max = 3.0
"#;

fn simulate(dir: &Path, text: &str, extra: &[&str]) -> Output {
    let config = dir.join("scenario.toml");
    std::fs::write(&config, text).unwrap();
    Command::new(env!("CARGO_BIN_EXE_simulate"))
        .arg("--config")
        .arg(&config)
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn controlled_run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), SCENARIO, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("3 control periods"), "{stdout}");
    for f in ["trajectory.csv", "decisions.csv", "report.json"] {
        assert!(dir.path().join("results").join(f).is_file(), "{f} missing");
    }
    let decisions = std::fs::read_to_string(dir.path().join("results/decisions.csv")).unwrap();
    assert_eq!(decisions.lines().count(), 4);
}

#[test]
fn mode_and_output_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("elsewhere");
    let o = simulate(
        dir.path(),
        SCENARIO,
        &["--mode", "open-loop", "--out", out.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!dir.path().join("results").exists());
    let report = std::fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"mode\": \"open-loop\""), "{report}");
    let decisions = std::fs::read_to_string(out.join("decisions.csv")).unwrap();
    assert_eq!(decisions.lines().count(), 1);
}

#[test]
fn seed_check_confirms_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), SCENARIO, &["--seed-check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("byte-identical"));
}

#[test]
fn invalid_configuration_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let negative_step = SCENARIO.replace("duration_days = 6.0", "duration_days = 6.0\nstep_days = -0.01");
    let o = simulate(dir.path(), &negative_step, &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));

    let no_controller = SCENARIO.split("[controller]").next().unwrap().to_string();
    let o = simulate(dir.path(), &no_controller, &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("controller"), "{}", stderr(&o));

    let unknown_mode = simulate(dir.path(), SCENARIO, &["--mode", "closed"]);
    assert_ne!(unknown_mode.status.code(), Some(0));

    let o = Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args(["--config", dir.path().join("absent.toml").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numerical_fault_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unstable = SCENARIO
        .replace("mode = \"mpc\"", "mode = \"open-loop\"")
        .replace("duration_days = 6.0", "duration_days = 6.0\nstep_days = 0.05");
    let o = simulate(dir.path(), &unstable, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!dir.path().join("results").exists());
}
