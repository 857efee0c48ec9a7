use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hulthen-fss"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().args(args).arg("--out").arg(dir).output().expect("spawn hulthen-fss")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

const SMALL_SWEEP: &str = "[sweep]\nlambda_min = 0.5\nlambda_max = 0.56\nlambda_steps = 13\nn_list = [8, 10, 12]\n";

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().skip(1).filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn rates_for_three_functions() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[sweep]\nn_list = [3]\n");
    let out = run(dir.path(), &["--config", cfg.to_str().unwrap(), "rates"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n_basis,n,beta");
    assert!(lines[1].starts_with("# hulthen-fss"));
    let betas: Vec<f64> = data_lines(&text)
        .iter()
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(betas.len(), 3);
    for (b, want) in betas.iter().zip([1e-4, 1.0, 1e4]) {
        assert!((b / want - 1.0).abs() < 1e-12, "{b} vs {want}");
    }
}

#[test]
fn default_rates_span_eight_decades() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["rates"]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    let rows = data_lines(&text);
    assert_eq!(rows.len(), (32..=48).step_by(2).sum::<usize>());
    let first: f64 = rows[0].split(',').nth(2).unwrap().parse().unwrap();
    let last: f64 = rows.last().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((first / 1e-4 - 1.0).abs() < 1e-12);
    assert!((last / 1e4 - 1.0).abs() < 1e-12);
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[numerics]\nbogus = 1\n");
    let out = run(dir.path(), &["--config", cfg.to_str().unwrap(), "sweep"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn bad_arguments_exit_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["--precision", "quad", "rates"]).status.code(), Some(2));
}

#[test]
fn sweep_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL_SWEEP);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (d, threads) in [(&a, "1"), (&b, "0")] {
        let out = run(d, &["--config", cfg.to_str().unwrap(), "--threads", threads, "sweep"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["surface.csv", "errors.csv"] {
        let x = fs::read(a.join(name)).unwrap();
        assert_eq!(x, fs::read(b.join(name)).unwrap(), "{name} differs between runs");
    }
    let surface = fs::read_to_string(a.join("surface.csv")).unwrap();
    assert_eq!(surface.lines().next(), Some("lambda,n_basis,E0,V,residual,status"));
    assert_eq!(data_lines(&surface).len(), 13 * 3);
}

#[test]
fn collapse_with_empty_window_fails() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL_SWEEP);
    let cfg = cfg.to_str().unwrap();
    assert_eq!(run(dir.path(), &["--config", cfg, "sweep"]).status.code(), Some(0));
    let surface = dir.path().join("surface.csv");
    let sub = dir.path().join("narrow");
    fs::create_dir_all(&sub).unwrap();
    let empty = write_config(
        &sub,
        &format!("{SMALL_SWEEP}[fss]\ncollapse_window = [0.9, 0.95]\ncollapse_lambda_c = 0.5\ncollapse_alpha = 2.0\ncollapse_nu = 1.0\n"),
    );
    let out = run(
        dir.path(),
        &["--config", empty.to_str().unwrap(), "collapse", "--surface", surface.to_str().unwrap()],
    );
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn collapse_with_given_exponents_writes_both_conventions() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{SMALL_SWEEP}[fss]\ncollapse_lambda_c = 0.5\ncollapse_alpha = 2.0\ncollapse_nu = 1.0\n"),
    );
    let out = run(dir.path(), &["--config", cfg.to_str().unwrap(), "collapse"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("collapse_summary.csv")).unwrap();
    let rows = data_lines(&summary);
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("Printed,") && rows[1].starts_with("Standard,"));
}

#[test]
fn loosened_numerics_fail_validation_with_exit_1() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[validate]\ntolerance_scale = 1e-30\nlambda_points = 20\n");
    let out = run(dir.path(), &["--config", cfg.to_str().unwrap(), "validate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn printed_b_element_fails_the_spectrum_check() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "[numerics]\nb_element_convention = \"paper_printed\"\n[validate]\nlambda_points = 20\n",
    );
    let out = run(dir.path(), &["--config", cfg.to_str().unwrap(), "validate"]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout.lines().find(|l| l.contains("analytic_spectrum")).unwrap();
    assert!(line.starts_with("FAIL"), "{line}");
    let report = fs::read_to_string(dir.path().join("validate_report.csv")).unwrap();
    assert!(report.lines().nth(1).unwrap().starts_with('#'));
}

#[test]
fn default_validation_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[validate]\nlambda_points = 40\n");
    let out = run(dir.path(), &["--config", cfg.to_str().unwrap(), "validate"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}
