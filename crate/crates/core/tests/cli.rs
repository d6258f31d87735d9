use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vibronic"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_default_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 11);
    assert!(dir.path().join("verify.json").exists());
    assert!(dir.path().join("verify.csv").exists());
}

#[test]
fn injected_fault_fails_one_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "f.toml", "[run]\ninject_fault = true\n");
    let o = run(&["verify", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let fails: Vec<String> = stdout(&o).lines().filter(|l| l.starts_with("FAIL")).map(String::from).collect();
    assert_eq!(fails.len(), 1);
    assert!(fails[0].contains("dressed_state_relaxation"));
}

#[test]
fn tiny_vibrational_space_reports_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "n.toml", "[system]\nn_vib = 2\n");
    let o = run(&["verify", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let line = stdout(&o).lines().find(|l| l.contains("vibronic_rabi_frequencies")).unwrap().to_string();
    assert!(line.starts_with("FAIL") && line.contains("truncation"), "{line}");
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.toml", "[system]\nfoo = 1\n");
    let o = run(&["simulate", "--config", &unknown]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("system.foo"), "{}", stderr(&o));

    let clash = write(dir.path(), "k.toml", "[run]\nkind = \"simulate\"\n");
    let o = run(&["verify", "--config", &clash]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run.kind"));

    let o = run(&["sweep", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["simulate", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn infeasible_plan_exits_one_and_names_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.toml", "[plan]\ndelta = 0.0\n");
    let o = run(&["plan-pulse", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("zero_detuning_no_transfer"));
}

#[test]
fn plan_reports_tens_of_lifetimes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("plan_cooling.toml");
    let o = run(&["plan-pulse", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let plan: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let lifetimes = plan["duration_lifetimes"].as_f64().unwrap();
    assert!((10.0..=100.0).contains(&lifetimes));
    assert!(plan["delta"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("plan.json").exists());
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn outputs_are_byte_stable() {
    let sweep = configs().join("sweep.toml");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, workers) in [(&a, "1"), (&b, "4")] {
        let o = run(&["sweep", "--config", sweep.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--workers", workers]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let (fa, fb) = (read_all(a.path()), read_all(b.path()));
    assert_eq!(fa.len(), 2);
    assert_eq!(fa, fb);

    let sim = configs().join("jc_rabi.toml");
    let c = tempfile::tempdir().unwrap();
    let d = tempfile::tempdir().unwrap();
    for dir in [&c, &d] {
        let o = run(&["simulate", "--config", sim.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(read_all(c.path()), read_all(d.path()));
}

#[test]
fn csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = configs().join("sweep.toml");
    let o = run(&["sweep", "--config", sweep.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!dir.path().join("sweep.json").exists());
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(text.ends_with('\n'));
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("delta,g0,m,omega,"));
    let first = lines.next().unwrap();
    // full precision floats
    assert!(first.starts_with("-5.0000000000000000e0,5.0000000000000000e-1,0,"), "{first}");
    assert_eq!(text.lines().count(), 166);
}

#[test]
fn every_example_config_runs() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let kind = text
            .lines()
            .find_map(|l| l.strip_prefix("kind = \""))
            .and_then(|s| s.strip_suffix('"'))
            .expect("example declares its kind")
            .to_string();
        let dir = tempfile::tempdir().unwrap();
        let o = run(&[&kind, "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), stderr(&o));
    }
}
