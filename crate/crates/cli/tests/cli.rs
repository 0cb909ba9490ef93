use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use clap::Parser;
use helm_open_cli::config::{parse_pairs, Initial};
use helm_open_cli::{Args, CliError, Command as Cmd, RunConfig};

fn bin_threads(args: &[&str], out: &Path, threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_helm-open"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("HELM_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn bin(args: &[&str], out: &Path) -> Output {
    bin_threads(args, out, "1")
}

fn resolve(args: &[&str]) -> Result<RunConfig, CliError> {
    let mut full = vec!["helm-open"];
    full.extend_from_slice(args);
    Args::try_parse_from(full).expect("flags parse").resolve()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn empty_config_gives_documented_defaults() {
    let cfg = resolve(&["solve"]).unwrap();
    assert_eq!(cfg.command, Cmd::Solve);
    assert_eq!(cfg.shapes, vec![helm_open::mesh::Shape::Annulus]);
    assert_eq!((cfg.radii.clone(), cfg.js.clone(), cfg.ks.clone()), (vec![2.0], vec![0], vec![1.0]));
    assert_eq!(cfg.refraction, helm_open::refraction::RefractionModel::Constant(1.0));
    assert!(!cfg.functional.weighted);
    assert_eq!(cfg.cgm.epsilon, 1e-8);
    assert_eq!(cfg.r_inner, 0.5);
    assert_eq!(cfg.outer_kind, helm_open::fem::OuterKind::Neumann);
    assert_eq!((cfg.seed, cfg.initial), (42, Initial::Zero));
}

#[test]
fn inadmissible_index_is_a_validation_error() {
    let err = resolve(&["solve", "--refraction", "angular:2.5"]).unwrap_err();
    assert!(matches!(err, CliError::Validation(_)), "{err}");
    let err = resolve(&["scan", "--a", "0,2"]).unwrap_err();
    assert!(matches!(err, CliError::Validation(_)), "{err}");
    let err = resolve(&["solve", "--R", "0.4"]).unwrap_err();
    assert!(matches!(err, CliError::Validation(_)), "{err}");
}

#[test]
fn parse_errors_name_the_line() {
    let err = parse_pairs("k = 1\n\nnonsense\n").unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    fs::write(&file, "# comment\nk = 1\nbogus = 3\n").unwrap();
    let err = resolve(&["solve", "--config", file.to_str().unwrap()]).unwrap_err();
    assert!(matches!(err, CliError::Parse { .. }) && err.to_string().contains("line 3"), "{err}");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    fs::write(&file, "k = 2\nj = 3\nR = 1,2,4,8\n").unwrap();
    let cfg = resolve(&["study", "--config", file.to_str().unwrap(), "--k", "0.5"]).unwrap();
    assert_eq!(cfg.ks, vec![0.5]);
    assert_eq!(cfg.js, vec![3]);
    assert_eq!(cfg.radii, vec![1.0, 2.0, 4.0, 8.0]);
}

#[test]
fn study_writes_one_row_per_radius_with_decreasing_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["study", "--R", "1,2,4,8", "--h", "0.4"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("study.csv"));
    assert_eq!(rows.len(), 4);
    let l2: Vec<f64> = rows.iter().map(|r| r[11].parse().unwrap()).collect();
    assert!(l2.windows(2).all(|w| w[1] < w[0]), "{l2:?}");
    assert!(dir.path().join("curves/annulus_j0_k1.dat").exists());
}

#[test]
fn study_output_is_bit_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["study", "--R", "1,2", "--j", "2", "--shape", "square", "--h", "0.3"];
    assert!(bin(&args, a.path()).status.success());
    assert!(bin(&args, b.path()).status.success());
    assert_eq!(fs::read(a.path().join("study.csv")).unwrap(), fs::read(b.path().join("study.csv")).unwrap());
}

#[test]
fn exact_samples_on_obstacle_are_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["exact", "--j", "0", "--k", "1"], dir.path());
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("exact_j0_k1.csv"));
    let on_obstacle: Vec<_> = rows.iter().filter(|r| r[0].parse::<f64>().unwrap() == 0.5).collect();
    assert!(!on_obstacle.is_empty());
    for r in on_obstacle {
        let (re, im): (f64, f64) = (r[4].parse().unwrap(), r[5].parse().unwrap());
        assert!((re - 1.0).abs() < 1e-12 && im.abs() < 1e-12, "{r:?}");
    }
}

#[test]
fn solve_writes_fields_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        bin(&["solve", "--j", "2", "--h", "0.3", "--field", "both", "--trace", "--initial", "random"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["solve.csv", "field.csv", "field.vtk", "trace.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("m,J,grad_norm,rho,gamma"));
    let j: Vec<f64> = trace.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(j.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{j:?}");
}

#[test]
fn mesh_command_writes_readable_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["mesh", "--shape", "ellipse", "--R", "2", "--h", "0.3"], dir.path());
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("mesh.txt")).unwrap();
    let mesh = helm_open::mesh::read_mesh(&text).unwrap();
    mesh.check_topology().unwrap();
}

#[test]
fn errors_exit_nonzero_without_final_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["solve", "--refraction", "angular:2.5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = bin(&["frobnicate"], dir.path());
    assert_ne!(out.status.code(), Some(0));
    let out = bin(&["exact", "--refraction", "gaussian_pair"], dir.path());
    assert_ne!(out.status.code(), Some(0));
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .map(|d| d.filter_map(|e| e.ok()).filter(|e| !e.file_name().to_string_lossy().ends_with(".partial")).collect())
        .unwrap_or_default();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn scan_writes_classification_per_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["scan", "--a", "0,0.8", "--R", "2,4", "--h", "0.4"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("scan_classification.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], "0.8");
    assert_eq!(rows[1][2], "growing");
    assert_eq!(csv_rows(&dir.path().join("scan.csv")).len(), 4);
}

#[test]
fn study_values_agree_across_thread_counts() {
    let args = ["study", "--R", "1,2", "--j", "2", "--refraction", "angular:0.1", "--h", "0.3"];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(bin_threads(&args, a.path(), "1").status.success());
    assert!(bin_threads(&args, b.path(), "3").status.success());
    for (ra, rb) in csv_rows(&a.path().join("study.csv")).iter().zip(csv_rows(&b.path().join("study.csv")).iter()) {
        for (x, y) in ra.iter().zip(rb).skip(9) {
            let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300), "{x} vs {y}");
        }
    }
}

#[test]
fn bad_thread_cap_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin_threads(&["exact"], dir.path(), "zero").status.code(), Some(2));
}
