use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_airy-edge"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect()
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn hermite_recurrence_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["recurrence", "--potential", "hermite", "--jmax", "64"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&dir.path().join("recurrence.csv"));
    assert_eq!(table.len(), 64);
    for (j, r) in table.iter().enumerate() {
        assert!(r[1].abs() < 1e-12);
        assert!((r[2] - ((j + 1) as f64 / 2.0).sqrt()).abs() < 1e-10);
    }
}

#[test]
fn quartic_recurrence_satisfies_string_equation() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["recurrence", "--potential", "quartic", "--N", "40"], dir.path());
    assert!(out.status.success());
    let m = manifest(&dir.path().join("recurrence_manifest.json"));
    assert!(m["details"]["string_equation_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(m["command"], "recurrence");
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "potential = \"hermite\"\nwidth = 3\n").unwrap();
    let out = run(&["scaling", "--N", "20", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    fs::write(&cfg, "beta = [\n").unwrap();
    let out = run(&["scaling", "--N", "20", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_ladder_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ladder.toml");
    fs::write(&cfg, "N_ladder = []\n").unwrap();
    let out = run(&["converge", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn odd_n_rejected_for_beta_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["kernel", "--beta", "1", "--N", "21"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sampling_is_reproducible_from_the_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["sample", "--N", "6", "--count", "40", "--seed", "11"];
    assert!(run(&args, a.path()).status.success());
    assert!(run(&args, b.path()).status.success());
    let first = fs::read(a.path().join("samples.csv")).unwrap();
    assert!(!first.is_empty());
    assert_eq!(first, fs::read(b.path().join("samples.csv")).unwrap());
    assert_eq!(manifest(&a.path().join("sample_manifest.json"))["seed"], 11);
}

#[test]
fn report_names_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["report"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn gap_curve_saturates_on_the_right() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["gap", "--N", "20", "--order", "40"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&dir.path().join("gap.csv"));
    let last = table.last().unwrap();
    assert!(last[1] >= 0.999 && last[2] >= 0.999, "{last:?}");
    assert!(table.windows(2).all(|w| w[1][1] >= w[0][1] - 1e-12));
}
