use std::path::Path;
use std::process::{Command, Output};

fn thermoporo(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_thermoporo"));
    cmd.args(args).env_remove("THERMOPORO_OUT");
    if let Some(dir) = out_env {
        cmd.env("THERMOPORO_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const MANUFACTURED: &str = r#"
experiment = "custom"
mesh_n = 4
dt_train = 0.01
t_train = 0.05
dt_online = 0.01
t_online = 0.05
ranks = [1, 2]

[custom]
forcing = "manufactured"
initial = "manufactured"
all_dirichlet = true
"#;

#[test]
fn unknown_experiment_is_a_usage_error() {
    let o = thermoporo(&["run", "--experiment", "bogus"], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn missing_inputs_are_usage_errors() {
    assert_eq!(code(&thermoporo(&["run"], None)), 2);
    assert_eq!(code(&thermoporo(&["run", "--config", "/nonexistent/cfg.toml"], None)), 2);
    assert_eq!(code(&thermoporo(&["frobnicate"], None)), 2);
    assert_eq!(code(&thermoporo(&["--help"], None)), 0);
}

#[test]
fn bad_toml_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = \"custom\"\nmesh_n = \"four\"\n");
    assert_eq!(code(&thermoporo(&["run", "--config", &cfg], None)), 2);
    let cfg = write_config(dir.path(), "experiment = \"custom\"\nno_such_key = 1\n");
    assert_eq!(code(&thermoporo(&["run", "--config", &cfg], None)), 2);
}

#[test]
fn zero_custom_run_succeeds_in_thermoporo_out() {
    let dir = tempfile::tempdir().unwrap();
    let o = thermoporo(&["run", "--experiment", "custom", "--mesh-n", "4"], Some(dir.path()));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.toml", "errors.csv", "iterations.csv", "timings.csv", "trajectory_m-hf.bin", "trajectory_fs-hf.bin"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    // --out wins over the environment
    let other = tempfile::tempdir().unwrap();
    let out = other.path().to_str().unwrap();
    let o = thermoporo(&["run", "--experiment", "custom", "--mesh-n", "4", "--out", out], Some(dir.path()));
    assert_eq!(code(&o), 0);
    assert!(other.path().join("config.toml").exists());
}

#[test]
fn singular_physics_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = \"custom\"\nmesh_n = 4\n\n[physics]\nmu = 0.0\n");
    let o = thermoporo(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn info_applies_overrides() {
    let o = thermoporo(&["info", "--experiment", "1a", "--cycles", "2", "--ranks", "1,3"], None);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("cycles = 2"), "{text}");
    assert!(text.contains("ranks = [1, 3]"), "{text}");
    assert!(text.contains("# free dofs"));
}

#[test]
fn pod_then_rom_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MANUFACTURED);
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let o = thermoporo(&["pod", "--config", &cfg, "--out", out_s], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("basis.bin").exists());
    assert!(out.join("eigenvalues.csv").exists());

    let o = thermoporo(&["rom", "--config", &cfg, "--out", out_s], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("rom_operators.bin").exists());
    let errors = std::fs::read_to_string(out.join("errors.csv")).unwrap();
    assert!(errors.starts_with("experiment,scheme,field,norm,cycle_or_r,value"));
    assert!(errors.contains("FS-ROM"));

    // a basis for another mesh is refused
    let o = thermoporo(&["rom", "--config", &cfg, "--mesh-n", "6", "--basis", out.join("basis.bin").to_str().unwrap(), "--out", out_s], None);
    assert_eq!(code(&o), 2);
    let o = thermoporo(&["rom", "--config", &cfg, "--basis", "/nonexistent.bin", "--out", out_s], None);
    assert_eq!(code(&o), 2);
}
